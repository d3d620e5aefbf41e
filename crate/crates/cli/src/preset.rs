//! The two built-in experiment sweeps.
//!
//! - `fig2`: broadcast networks of growing size N = 10, 20, ..., 200 with
//!   arrival rate 10/(N+10), half the clients on a good channel (p = 0.9)
//!   and half on a bad one (p = 0.1); horizon 6·N·10^4 slots.
//! - `fig3`: fixed N = 40 at arrival rate 0.2; twenty clients stay at
//!   p = 0.1 while the other twenty sweep p over 0.1, 0.2, ..., 1.0;
//!   horizon 3·10^6 slots.
//!
//! `scale` multiplies every horizon, and for the default fig2 sweep also
//! thins the N grid (keep every round(1/scale)-th point) so a desk run
//! finishes in minutes. Explicit `--n`/`--p-values` lists override the
//! sweep grid but still honor the horizon scaling.

use aoi_core::{ClientParams, PolicyKind};

/// Policies each preset simulates, in output order.
pub const PRESET_POLICIES: [PolicyKind; 2] =
    [PolicyKind::ApproxIndex, PolicyKind::ArrivalAware];

/// One sweep point: a network plus how long to run it.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Experiment label echoed in the CSV (carries the sweep coordinate
    /// when the N column does not, so each row is self-describing).
    pub label: String,
    pub clients: Vec<ClientParams>,
    pub horizon: u64,
}

fn check_scale(scale: f64) -> Result<(), String> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(format!("scale must be positive, got {scale}"))
    }
}

fn scaled_horizon(base: f64, scale: f64) -> Result<u64, String> {
    let h = (base * scale).round();
    if h < 100.0 {
        return Err(format!(
            "scaled horizon {h} is too short to measure anything (scale {scale})"
        ));
    }
    Ok(h as u64)
}

pub fn fig2_sweep(scale: f64, ns: Option<&[u32]>) -> Result<Vec<SweepPoint>, String> {
    check_scale(scale)?;
    let default_ns: Vec<u32> = (1..=20).map(|k| 10 * k).collect();
    let ns: Vec<u32> = match ns {
        Some(list) if list.is_empty() => return Err("empty N list".into()),
        Some(list) => list.to_vec(),
        None => {
            let stride = (1.0 / scale).round().max(1.0) as usize;
            default_ns.iter().copied().step_by(stride).collect()
        }
    };
    let mut points = Vec::with_capacity(ns.len());
    for n in ns {
        if n < 2 || n % 2 != 0 {
            return Err(format!("fig2 needs even N >= 2 (half good, half bad), got {n}"));
        }
        let lambda = 10.0 / (n as f64 + 10.0);
        let good = ClientParams::new(lambda, 0.9).map_err(|e| e.to_string())?;
        let bad = ClientParams::new(lambda, 0.1).map_err(|e| e.to_string())?;
        let half = (n / 2) as usize;
        let mut clients = vec![good; half];
        clients.extend(vec![bad; half]);
        points.push(SweepPoint {
            label: "fig2".to_string(),
            clients,
            horizon: scaled_horizon(6.0e4 * n as f64, scale)?,
        });
    }
    Ok(points)
}

pub fn fig3_sweep(scale: f64, p_values: Option<&[f64]>) -> Result<Vec<SweepPoint>, String> {
    check_scale(scale)?;
    let ps: Vec<f64> = match p_values {
        Some(list) if list.is_empty() => return Err("empty p list".into()),
        Some(list) => list.to_vec(),
        None => (1..=10).map(|k| k as f64 / 10.0).collect(),
    };
    let fixed = ClientParams::new(0.2, 0.1).map_err(|e| e.to_string())?;
    let horizon = scaled_horizon(3.0e6, scale)?;
    let mut points = Vec::with_capacity(ps.len());
    for p in ps {
        let swept = ClientParams::new(0.2, p)
            .map_err(|e| format!("bad sweep probability {p}: {e}"))?;
        let mut clients = vec![fixed; 20];
        clients.extend(vec![swept; 20]);
        points.push(SweepPoint { label: format!("fig3[pvar={p}]"), clients, horizon });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use aoi_core::aoi_lower_bound;

    #[test]
    fn fig2_full_sweep_shape() {
        let points = fig2_sweep(1.0, None).unwrap();
        assert_eq!(points.len(), 20);
        let first = &points[0];
        assert_eq!(first.clients.len(), 10);
        assert_eq!(first.horizon, 600_000);
        assert!(first.clients.iter().all(|c| c.arrival_prob() == 0.5));
        assert_eq!(first.clients.iter().filter(|c| c.success_prob() == 0.9).count(), 5);
        assert_eq!(points[19].clients.len(), 200);
        assert_eq!(points[19].horizon, 12_000_000);
    }

    #[test]
    fn fig2_lower_bound_at_ten_clients_is_exact() {
        let points = fig2_sweep(1.0, Some(&[10])).unwrap();
        let ps: Vec<f64> = points[0].clients.iter().map(|c| c.success_prob()).collect();
        let lb = aoi_lower_bound(&ps).unwrap();
        assert!((lb - (200.0 / 9.0 + 0.5)).abs() < 1e-12, "{lb}");
    }

    #[test]
    fn fig2_scale_thins_and_shortens() {
        let points = fig2_sweep(0.1, None).unwrap();
        let ns: Vec<usize> = points.iter().map(|p| p.clients.len()).collect();
        assert_eq!(ns, vec![10, 110]);
        assert_eq!(points[0].horizon, 60_000);
        let explicit = fig2_sweep(0.1, Some(&[10, 20, 40])).unwrap();
        assert_eq!(explicit.len(), 3);
        assert_eq!(explicit[1].horizon, 120_000);
    }

    #[test]
    fn fig2_rejects_odd_or_tiny_n() {
        assert!(fig2_sweep(1.0, Some(&[15])).is_err());
        assert!(fig2_sweep(1.0, Some(&[0])).is_err());
        assert!(fig2_sweep(-1.0, None).is_err());
    }

    #[test]
    fn fig3_sweep_shape_and_labels() {
        let points = fig3_sweep(1.0, None).unwrap();
        assert_eq!(points.len(), 10);
        for pt in &points {
            assert_eq!(pt.clients.len(), 40);
            assert_eq!(pt.horizon, 3_000_000);
            assert!(pt.clients.iter().all(|c| c.arrival_prob() == 0.2));
            assert_eq!(pt.clients.iter().filter(|c| c.success_prob() == 0.1).count(),
                if pt.label == "fig3[pvar=0.1]" { 40 } else { 20 });
        }
        assert_eq!(points[2].label, "fig3[pvar=0.3]");
        let custom = fig3_sweep(0.1, Some(&[0.1, 1.0])).unwrap();
        assert_eq!(custom.len(), 2);
        assert_eq!(custom[0].horizon, 300_000);
        assert_eq!(custom[1].label, "fig3[pvar=1]");
    }
}
