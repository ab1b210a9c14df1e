use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelevanceError {
    #[error("all target values are equal")]
    ZeroSpread,
    #[error("need at least {min} target values, got {got}")]
    TooFewValues { min: usize, got: usize },
    #[error("relevance needs at least one control point")]
    NoControlPoints,
    #[error("control point {index}: {reason}")]
    BadControlPoint { index: usize, reason: String },
    #[error("line {line}: expected `y phi slope`")]
    Syntax { line: usize },
}

/// A knot of the relevance curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub y: f64,
    pub phi: f64,
    pub slope: f64,
}

/// Piecewise-cubic Hermite map from target values to `[0, 1]`.
///
/// Slopes are limited per segment (Fritsch-Carlson) so no segment leaves
/// the range spanned by its end values; beyond the outer knots the curve is
/// flat.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceFunction {
    knots: Vec<ControlPoint>,
}

impl RelevanceFunction {
    pub fn new(mut knots: Vec<ControlPoint>) -> Result<Self, RelevanceError> {
        if knots.is_empty() {
            return Err(RelevanceError::NoControlPoints);
        }
        for (index, k) in knots.iter().enumerate() {
            let bad = |reason: &str| RelevanceError::BadControlPoint {
                index,
                reason: reason.to_string(),
            };
            if !k.y.is_finite() || !k.slope.is_finite() {
                return Err(bad("non-finite value"));
            }
            if !(0.0..=1.0).contains(&k.phi) {
                return Err(bad("relevance outside [0, 1]"));
            }
        }
        knots.sort_by(|a, b| a.y.total_cmp(&b.y));
        if let Some(i) = knots.windows(2).position(|w| w[0].y == w[1].y) {
            return Err(RelevanceError::BadControlPoint {
                index: i + 1,
                reason: "duplicate y".to_string(),
            });
        }
        Ok(Self { knots })
    }

    /// Same relevance for every target.
    pub fn constant(phi: f64) -> Self {
        Self::new(vec![ControlPoint {
            y: 0.0,
            phi,
            slope: 0.0,
        }])
        .expect("constant relevance must lie in [0, 1]")
    }

    /// Reads whitespace-separated `y phi slope` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, RelevanceError> {
        let mut knots = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| RelevanceError::Syntax { line: i + 1 })?;
            if fields.len() != 3 {
                return Err(RelevanceError::Syntax { line: i + 1 });
            }
            knots.push(ControlPoint {
                y: fields[0],
                phi: fields[1],
                slope: fields[2],
            });
        }
        Self::new(knots)
    }

    pub fn control_points(&self) -> &[ControlPoint] {
        &self.knots
    }

    pub fn eval(&self, y: f64) -> f64 {
        let k = &self.knots;
        let first = k[0];
        let last = k[k.len() - 1];
        if y <= first.y {
            return first.phi;
        }
        if y >= last.y {
            return last.phi;
        }
        // k[seg].y < y < k[seg + 1].y, or y hits a knot exactly
        let seg = k.partition_point(|c| c.y <= y) - 1;
        let (a, b) = (k[seg], k[seg + 1]);
        if y == a.y {
            return a.phi;
        }
        let h = b.y - a.y;
        let secant = (b.phi - a.phi) / h;
        let (m0, m1) = limit_slopes(a.slope, b.slope, secant);
        let t = (y - a.y) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * a.phi
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * b.phi
            + (t3 - t2) * h * m1;
        let (lo, hi) = if a.phi <= b.phi {
            (a.phi, b.phi)
        } else {
            (b.phi, a.phi)
        };
        v.clamp(lo, hi)
    }
}

/// Fritsch-Carlson conditions for a monotone cubic on one segment.
fn limit_slopes(m0: f64, m1: f64, secant: f64) -> (f64, f64) {
    if secant == 0.0 {
        return (0.0, 0.0);
    }
    let a = if m0 * secant > 0.0 { m0 / secant } else { 0.0 };
    let b = if m1 * secant > 0.0 { m1 / secant } else { 0.0 };
    let r = a * a + b * b;
    if r > 9.0 {
        let tau = 3.0 / r.sqrt();
        (tau * a * secant, tau * b * secant)
    } else {
        (a * secant, b * secant)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const MIN_RELEVANCE_SAMPLES: usize = 5;

/// Boxplot-based relevance: 0 at the median rising to 1 at the whisker
/// fences `Q1 - 1.5 IQR` and `Q3 + 1.5 IQR`, all knot slopes 0.
///
/// A fence with no observation beyond it moves in to the observed extreme.
/// A fence that collapses onto the median (zero IQR) also moves out to the
/// extreme, so values away from the bulk still score as relevant.
pub fn build_relevance(y: &[f64]) -> Result<RelevanceFunction, RelevanceError> {
    if y.len() < MIN_RELEVANCE_SAMPLES {
        return Err(RelevanceError::TooFewValues {
            min: MIN_RELEVANCE_SAMPLES,
            got: y.len(),
        });
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if min == max {
        return Err(RelevanceError::ZeroSpread);
    }
    let median = quantile(&sorted, 0.5);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let mut low = q1 - 1.5 * iqr;
    let mut high = q3 + 1.5 * iqr;
    if min >= low || low >= median {
        low = min;
    }
    if max <= high || high <= median {
        high = max;
    }
    let mut knots = vec![ControlPoint {
        y: median,
        phi: 0.0,
        slope: 0.0,
    }];
    if low < median {
        knots.push(ControlPoint {
            y: low,
            phi: 1.0,
            slope: 0.0,
        });
    }
    if high > median {
        knots.push(ControlPoint {
            y: high,
            phi: 1.0,
            slope: 0.0,
        });
    }
    RelevanceFunction::new(knots)
}
