//! Final placement error per component: X and Y in millimetres, yaw in degrees.

use serde::{Deserialize, Serialize};

use assembly_core::{wrap_angle, Pose64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    /// Sample standard deviation (zero for a single sample).
    pub std: f64,
    pub rmse: f64,
}

impl ErrorStats {
    pub fn of(e: &[f64]) -> Self {
        let n = e.len() as f64;
        if e.is_empty() {
            return ErrorStats {
                mean: 0.0,
                std: 0.0,
                rmse: 0.0,
            };
        }
        let mean = e.iter().sum::<f64>() / n;
        let var = if e.len() > 1 {
            e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let rmse = (e.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
        ErrorStats {
            mean,
            std: var.sqrt(),
            rmse,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub samples: usize,
    pub x_mm: ErrorStats,
    pub y_mm: ErrorStats,
    pub yaw_deg: ErrorStats,
}

/// Signed errors `final - goal` over every component of every world.
pub fn report_accuracy(finals: &[Vec<Pose64>], goals: &[Pose64]) -> AccuracySummary {
    let (mut xs, mut ys, mut yaws) = (Vec::new(), Vec::new(), Vec::new());
    for world in finals {
        for (c, g) in world.iter().zip(goals) {
            let (p, q) = (c.position(), g.position());
            xs.push((p[0] - q[0]) * 1e3);
            ys.push((p[1] - q[1]) * 1e3);
            yaws.push(wrap_angle(c.yaw() - g.yaw()).to_degrees());
        }
    }
    AccuracySummary {
        samples: xs.len(),
        x_mm: ErrorStats::of(&xs),
        y_mm: ErrorStats::of(&ys),
        yaw_deg: ErrorStats::of(&yaws),
    }
}

impl std::fmt::Display for AccuracySummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<10} {:>18} {:>10}", "error", "mean ± std", "RMSE")?;
        for (name, s) in [("X (mm)", self.x_mm), ("Y (mm)", self.y_mm), ("yaw (deg)", self.yaw_deg)] {
            writeln!(f, "{name:<10} {:>8.3} ± {:<7.3} {:>10.3}", s.mean, s.std, s.rmse)?;
        }
        write!(f, "({} component placements)", self.samples)
    }
}
