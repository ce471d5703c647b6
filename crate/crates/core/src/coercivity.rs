//! Desk-scale compactness probes: ray-growth exponents of the residual
//! functional and a budgeted search for bounded-value escape sequences.
//!
//! Neither check proves anything about the compactness hypothesis; the
//! outputs are labeled evidence. In finite dimensions, coercivity of
//! `phi_y` together with continuous derivatives is a sufficient practical
//! route, and the escape search looks for the opposite: points of small
//! gradient and bounded value at large norm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{Functional, LeastSquaresFunctional};
use crate::linalg::Vector;
use crate::operator::OperatorSpec;
use crate::sampling::random_unit_directions;

/// Options for [`ray_growth`].
#[derive(Debug, Clone, Serialize)]
pub struct GrowthOpts {
    pub n_directions: usize,
    /// Geometric radius grid spanning at least three decades.
    pub radii: Vec<f64>,
    pub seed: u64,
}

impl Default for GrowthOpts {
    fn default() -> Self {
        GrowthOpts {
            n_directions: 64,
            radii: geometric_radii(1.0, 1e3, 16),
            seed: 0,
        }
    }
}

/// Geometric grid of `n` radii from `lo` to `hi` inclusive.
pub fn geometric_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut radii = Vec::with_capacity(n);
    let mut r = lo;
    for _ in 0..n {
        radii.push(r);
        r *= ratio;
    }
    radii
}

/// Fit along a single ray.
#[derive(Debug, Clone, Serialize)]
pub struct DirectionGrowth {
    pub direction: Vec<f64>,
    /// Log-log slope of `phi` over the top decade of radii.
    pub exponent: f64,
    pub phi_at_min_radius: f64,
    pub phi_at_max_radius: f64,
    /// Some radii produced non-finite or nonpositive values and were
    /// dropped from the fit.
    pub clipped: bool,
}

/// Ray-growth evidence for coercivity of `phi_y`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub per_direction: Vec<DirectionGrowth>,
    pub min_exponent: f64,
    /// Every ray grows from the smallest to the largest radius and the
    /// minimum fitted exponent is positive.
    pub coercive_flag: bool,
    pub warnings: Vec<String>,
    pub radii: Vec<f64>,
    pub seed: u64,
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Fits the growth exponent of `phi_y(r d)` in `r` along sampled unit rays.
///
/// The slope is fit over the top decade only, where the leading monomial
/// dominates lower-order terms.
pub fn ray_growth(op: &OperatorSpec, y: &Vector, opts: &GrowthOpts) -> Result<GrowthReport> {
    if opts.radii.len() < 4 {
        return Err(Error::Precondition("need at least 4 radii".into()));
    }
    let lo = opts.radii[0];
    let hi = *opts.radii.last().unwrap();
    if !(lo > 0.0) || hi / lo < 999.0 {
        return Err(Error::Precondition(
            "radii must be positive and span at least three decades".into(),
        ));
    }
    for w in opts.radii.windows(3) {
        let r1 = w[1] / w[0];
        let r2 = w[2] / w[1];
        if (r1 - r2).abs() > 1e-6 * r1 {
            return Err(Error::Precondition("radii must form a geometric grid".into()));
        }
    }
    let f = LeastSquaresFunctional::new(op.clone(), y.clone())?;
    let dim = op.dim_in();
    let dirs = if dim == 1 {
        vec![Vector::from_vec(vec![1.0]), Vector::from_vec(vec![-1.0])]
    } else {
        random_unit_directions(dim, opts.n_directions, opts.seed)
    };

    let mut warnings = Vec::new();
    let mut per_direction = Vec::with_capacity(dirs.len());
    let mut min_exponent = f64::INFINITY;
    let mut min_phi_at_max = f64::INFINITY;
    let mut max_phi_at_min = f64::NEG_INFINITY;
    for (k, d) in dirs.iter().enumerate() {
        let mut samples = Vec::with_capacity(opts.radii.len());
        let mut clipped = false;
        for &r in &opts.radii {
            match f.phi(&(d * r)) {
                Ok(phi) if phi.is_finite() => samples.push((r, phi)),
                _ => clipped = true,
            }
        }
        if clipped {
            warnings.push(format!(
                "direction {k}: non-finite values clipped from the fit"
            ));
        }
        if samples.len() < 3 {
            warnings.push(format!("direction {k}: too few finite samples"));
            continue;
        }
        let phi_min_r = samples.first().unwrap().1;
        let phi_max_r = samples.last().unwrap().1;
        let top: Vec<(f64, f64)> = samples
            .iter()
            .filter(|(r, phi)| *r >= hi / 10.0 * (1.0 - 1e-12) && *phi > 0.0)
            .map(|(r, phi)| (r.ln(), phi.ln()))
            .collect();
        let exponent = if top.len() >= 3 {
            loglog_slope(&top)
        } else {
            warnings.push(format!(
                "direction {k}: vanishing values in the top decade; no exponent"
            ));
            f64::NAN
        };
        if exponent.is_finite() {
            min_exponent = min_exponent.min(exponent);
        }
        min_phi_at_max = min_phi_at_max.min(phi_max_r);
        max_phi_at_min = max_phi_at_min.max(phi_min_r);
        per_direction.push(DirectionGrowth {
            direction: d.as_slice().to_vec(),
            exponent,
            phi_at_min_radius: phi_min_r,
            phi_at_max_radius: phi_max_r,
            clipped,
        });
    }
    if per_direction.is_empty() {
        return Err(Error::Numerical("no direction produced a usable ray".into()));
    }
    let coercive_flag = min_phi_at_max > max_phi_at_min && min_exponent > 0.0;
    Ok(GrowthReport {
        per_direction,
        min_exponent,
        coercive_flag,
        warnings,
        radii: opts.radii.clone(),
        seed: opts.seed,
    })
}

/// Options for [`ps_probe`].
#[derive(Debug, Clone, Serialize)]
pub struct PsProbeOpts {
    /// Start norms; the probe launches from each rung times each direction.
    pub norm_ladder: Vec<f64>,
    pub n_directions: usize,
    /// Gradient-norm descent iterations per start.
    pub descent_iters: usize,
    /// Gradient norm below which a point is a candidate.
    pub grad_tol: f64,
    /// Point norm above which a candidate counts as an escape.
    pub norm_blowup: f64,
    /// Value cap for "bounded"; defaults to `max(1, 2 phi(0))`.
    pub value_cap: Option<f64>,
    pub seed: u64,
}

impl Default for PsProbeOpts {
    fn default() -> Self {
        PsProbeOpts {
            norm_ladder: vec![1e1, 1e2, 1e3, 1e4],
            n_directions: 8,
            descent_iters: 40,
            grad_tol: 1e-6,
            norm_blowup: 1e2,
            value_cap: None,
            seed: 0,
        }
    }
}

/// A recorded probe point.
#[derive(Debug, Clone, Serialize)]
pub struct PsCandidate {
    pub point: Vec<f64>,
    pub phi: f64,
    pub grad_norm: f64,
}

/// Outcome of the escape search. Absence of a violation within budget is
/// evidence, not proof.
#[derive(Debug, Clone, Serialize)]
pub struct PsProbeReport {
    /// Strongest candidate per start (largest norm at small gradient).
    pub candidate_sequences: Vec<PsCandidate>,
    pub violation_found: bool,
    /// Largest point norm among candidates with small gradient and bounded
    /// value; zero if none.
    pub max_norm_at_small_gradient: f64,
    pub value_cap: f64,
    pub seed: u64,
}

/// Searches for bounded-value, vanishing-gradient points at large norm by
/// minimizing the gradient norm from far-out seeded starts.
pub fn ps_probe(f: &dyn Functional, opts: &PsProbeOpts) -> Result<PsProbeReport> {
    if opts.norm_ladder.is_empty() || opts.n_directions == 0 {
        return Err(Error::Config("empty probe ladder".into()));
    }
    let dim = f.dim();
    let origin = Vector::zeros(dim);
    let cap = match opts.value_cap {
        Some(c) => c,
        None => (2.0 * f.value(&origin)?).max(1.0),
    };
    let grad_norm = |x: &Vector| -> Result<f64> { Ok(f.gradient(x)?.norm()) };

    let dirs = if dim == 1 {
        vec![Vector::from_vec(vec![1.0]), Vector::from_vec(vec![-1.0])]
    } else {
        random_unit_directions(dim, opts.n_directions, opts.seed)
    };

    let mut candidates = Vec::new();
    let mut violation_found = false;
    let mut max_norm: f64 = 0.0;
    for d in &dirs {
        for &rung in &opts.norm_ladder {
            let mut x = d * rung;
            let mut g = grad_norm(&x)?;
            let mut best: Option<PsCandidate> = None;
            let consider = |x: &Vector, g: f64, best: &mut Option<PsCandidate>| -> Result<()> {
                let phi = f.value(x)?;
                if g <= opts.grad_tol && phi <= cap {
                    let norm = x.norm();
                    if best.as_ref().is_none_or(|b| {
                        norm > Vector::from_vec(b.point.clone()).norm()
                    }) {
                        *best = Some(PsCandidate {
                            point: x.as_slice().to_vec(),
                            phi,
                            grad_norm: g,
                        });
                    }
                }
                Ok(())
            };
            consider(&x, g, &mut best)?;
            // Descend the gradient norm itself, nudging toward would-be
            // escape points; the gradient of |grad| comes from differences.
            for _ in 0..opts.descent_iters {
                let mut dir = Vector::zeros(dim);
                let mut xp = x.clone();
                for j in 0..dim {
                    let t = 1e-4 * x[j].abs().max(1.0);
                    xp[j] = x[j] + t;
                    let gp = grad_norm(&xp)?;
                    xp[j] = x[j] - t;
                    let gm = grad_norm(&xp)?;
                    xp[j] = x[j];
                    dir[j] = (gp - gm) / (2.0 * t);
                }
                let dn = dir.norm();
                if dn == 0.0 || g <= opts.grad_tol * 1e-3 {
                    break;
                }
                let mut t = 0.1 * (1.0 + x.norm());
                let mut moved = false;
                for _ in 0..25 {
                    let cand = &x - &dir * (t / dn);
                    let cand_g = grad_norm(&cand)?;
                    if cand_g < g {
                        x = cand;
                        g = cand_g;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !moved {
                    break;
                }
                consider(&x, g, &mut best)?;
            }
            if let Some(c) = best {
                let norm = Vector::from_vec(c.point.clone()).norm();
                if norm >= opts.norm_blowup {
                    violation_found = true;
                }
                max_norm = max_norm.max(norm);
                candidates.push(c);
            }
        }
    }

    Ok(PsProbeReport {
        candidate_sequences: candidates,
        violation_found,
        max_norm_at_small_gradient: max_norm,
        value_cap: cap,
        seed: opts.seed,
    })
}
