//! Single-input state-feedback design that places the closed-loop poles at
//! prescribed distinct-magnitude locations while making the pair
//! (A + BK, C) maximally resilient: every closed-loop eigenvector must be
//! seen by all sensors, which pushes the number of correctable sensor errors
//! to its ceiling.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg;
use crate::model::{self, LinearSystem};
use crate::resilience;

/// Requested closed-loop spectrum: closed under conjugation (a real gain
/// must exist) with pairwise distinct magnitudes. Since conjugate pairs
/// share a magnitude, valid specs are real in practice.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSpec {
    poles: Vec<Complex<f64>>,
}

impl PoleSpec {
    pub fn new(poles: Vec<Complex<f64>>) -> Result<Self, Error> {
        if poles.is_empty() {
            return Err(Error::Dimension("pole list must be nonempty".into()));
        }
        if poles.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
            return Err(Error::NonFinite("pole list contains NaN or infinity".into()));
        }
        // Conjugate closure as a multiset.
        let mut remaining: Vec<Complex<f64>> = poles.clone();
        while let Some(l) = remaining.pop() {
            if l.im.abs() <= 1e-12 * (1.0 + l.norm()) {
                continue;
            }
            let conj = l.conj();
            match remaining
                .iter()
                .position(|c| (c - conj).norm() <= 1e-9 * (1.0 + conj.norm()))
            {
                Some(idx) => {
                    remaining.swap_remove(idx);
                }
                None => {
                    return Err(Error::Dimension(format!(
                        "pole {}+{}i has no conjugate partner; a real gain cannot exist",
                        l.re, l.im
                    )))
                }
            }
        }
        // Pairwise distinct magnitudes.
        let mut mags: Vec<f64> = poles.iter().map(|l| l.norm()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tol = 1e-8 * (1.0 + mags.last().copied().unwrap_or(0.0));
        for w in mags.windows(2) {
            if (w[1] - w[0]).abs() <= tol {
                return Err(Error::EigenvalueMagnitudes(format!(
                    "pole magnitudes {:.6} and {:.6} coincide",
                    w[0], w[1]
                )));
            }
        }
        Ok(PoleSpec { poles })
    }

    pub fn poles(&self) -> &[Complex<f64>] {
        &self.poles
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }
}

/// Gain computation outcome with conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct PolePlacement {
    /// 1 x n gain K; the closed loop is A + B K.
    pub gain: DMatrix<f64>,
    pub achieved_poles: Vec<Complex<f64>>,
    /// Condition number of the controllability matrix.
    pub condition_number: f64,
    /// Present when the controllability matrix is ill-conditioned
    /// (condition number above 1e12); the gain is still returned.
    pub warning: Option<String>,
}

/// Final design artifact: the gain plus the resilience evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackDesign {
    /// 1 x n gain as a flat row.
    pub gain: Vec<f64>,
    /// Closed-loop eigenvalues as (re, im) pairs.
    pub achieved_poles: Vec<(f64, f64)>,
    /// |supp(C v)| for each closed-loop eigenvector v.
    pub eigenvector_supports: Vec<usize>,
    /// True when every closed-loop eigenvector image has full support, so
    /// n-step correctability is maximal.
    pub resilience_verified: bool,
    /// Maximum correctable errors confirmed by subset enumeration (only
    /// computed for small sensor counts).
    pub verified_q_max: Option<i64>,
    pub warnings: Vec<String>,
}

/// Monic real polynomial with the given conjugate-closed roots; returns
/// coefficients `[c_0, ..., c_{n-1}]` of `z^n + c_{n-1} z^{n-1} + ... + c_0`.
fn real_polynomial_from_roots(roots: &[Complex<f64>]) -> Result<Vec<f64>, Error> {
    let mut coeffs: Vec<Complex<f64>> = vec![Complex::new(1.0, 0.0)];
    for &root in roots {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * root;
        }
        coeffs = next;
    }
    let scale: f64 = roots.iter().map(|r| 1.0 + r.norm()).product();
    let mut out = Vec::with_capacity(coeffs.len() - 1);
    for c in &coeffs[..coeffs.len() - 1] {
        if c.im.abs() > 1e-10 * scale.max(1.0) {
            return Err(Error::Dimension(
                "pole list is not conjugate-closed: characteristic polynomial is complex".into(),
            ));
        }
        out.push(c.re);
    }
    Ok(out)
}

fn controllability_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut ctrb = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_column(j, &col);
        if j + 1 < n {
            col = a * col;
        }
    }
    ctrb
}

fn single_input_column(system_b: &DMatrix<f64>) -> Result<DVector<f64>, Error> {
    if system_b.ncols() != 1 {
        return Err(Error::Dimension(format!(
            "resilient placement handles single-input plants only, got m = {}",
            system_b.ncols()
        )));
    }
    Ok(system_b.column(0).into_owned())
}

/// Place the closed-loop poles of `A + B K` for a single-input pair by the
/// gain formula `K = -e_n' Ctrb^{-1} q(A)` with `q` the desired
/// characteristic polynomial.
pub fn place_poles_for_roots(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    roots: &[Complex<f64>],
) -> Result<PolePlacement, Error> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension("A must be square and B a matching column".into()));
    }
    if roots.len() != n {
        return Err(Error::Dimension(format!("need exactly {n} poles, got {}", roots.len())));
    }
    let ctrb = controllability_matrix(a, b);
    let svd = ctrb.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let tol = linalg::rank_tolerance(n, n, sigma_max);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < n {
        return Err(Error::Uncontrollable { rank, n });
    }
    let condition_number = sigma_max / sigma_min;
    let warning = (condition_number > 1e12).then(|| {
        format!("controllability matrix is ill-conditioned (cond = {condition_number:.3e})")
    });

    let coeffs = real_polynomial_from_roots(roots)?;
    // q(A) by Horner: q(A) = A^n + c_{n-1} A^{n-1} + ... + c_0 I.
    let mut q_a = DMatrix::identity(n, n);
    for k in (0..n).rev() {
        q_a = &q_a * a;
        for i in 0..n {
            q_a[(i, i)] += coeffs[k];
        }
    }
    // w solves Ctrb' w = e_n; then K = -w' q(A).
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    let w = ctrb
        .transpose()
        .lu()
        .solve(&e_n)
        .ok_or(Error::Uncontrollable { rank, n })?;
    let gain_row = -(w.transpose() * q_a);
    let gain = DMatrix::from_row_slice(1, n, gain_row.transpose().as_slice());
    let closed = a + b * &gain;
    let achieved_poles = linalg::eigenvalues(&closed);
    Ok(PolePlacement { gain, achieved_poles, condition_number, warning })
}

/// Place poles from a validated spec.
pub fn place_poles(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    spec: &PoleSpec,
) -> Result<PolePlacement, Error> {
    place_poles_for_roots(a, b, spec.poles())
}

/// Greedy matching of achieved against requested poles; returns the largest
/// pairing distance.
pub fn spectrum_mismatch(achieved: &[Complex<f64>], requested: &[Complex<f64>]) -> f64 {
    let mut unused: Vec<Complex<f64>> = achieved.to_vec();
    let mut worst = 0.0f64;
    for want in requested {
        let (idx, dist) = unused
            .iter()
            .enumerate()
            .map(|(i, got)| (i, (got - want).norm()))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .expect("pole counts match");
        worst = worst.max(dist);
        unused.swap_remove(idx);
    }
    worst
}

/// Outcome of probing one candidate pole.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityCheck {
    pub admissible: bool,
    /// |supp(C (lambda I - A)^{-1} B)|.
    pub support_count: usize,
    /// First sensor blind to the forced eigenvector, when inadmissible.
    pub blocking_sensor: Option<usize>,
    /// Some entry of the image sits within 1e-6 of zero relative to the
    /// vector norm: admissible but close to the exclusion set.
    pub fragile: bool,
}

/// Probe whether a closed-loop eigenvalue candidate keeps every sensor
/// active: the forced eigenvector of any single-input closed loop at
/// `lambda` is `(lambda I - A)^{-1} B`, and its image under C must have full
/// support.
pub fn check_pole_admissibility(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    lambda: Complex<f64>,
) -> Result<AdmissibilityCheck, Error> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || c.ncols() != n {
        return Err(Error::Dimension("A square, B column, C with n columns required".into()));
    }
    let mut shifted = a.map(|x| Complex::new(-x, 0.0));
    for i in 0..n {
        shifted[(i, i)] += lambda;
    }
    // Reject lambda at (or numerically near) the spectrum of A.
    let svd_probe = shifted.clone().svd(false, false);
    let sigma_max = svd_probe.singular_values.max();
    let sigma_min = svd_probe.singular_values.min();
    if sigma_min <= linalg::rank_tolerance(n, n, sigma_max) {
        return Err(Error::InadmissiblePole {
            pole: (lambda.re, lambda.im),
            sensor: None,
            suggestion: (lambda.re * 1.001, lambda.im * 1.001),
        });
    }
    let rhs = b.map(|x| Complex::new(x, 0.0));
    let v = shifted
        .lu()
        .solve(&rhs)
        .expect("resolvent solve after nonsingularity check");
    let image = c.map(|x| Complex::new(x, 0.0)) * v;
    let mags: DVector<f64> = image.map(|z| z.norm());
    let support = model::vector_support(&mags);
    let image_norm = mags.norm();
    let fragile = mags.iter().any(|&x| x < 1e-6 * image_norm);
    let blocking_sensor = (0..c.nrows()).find(|i| !support.contains(i));
    Ok(AdmissibilityCheck {
        admissible: support.len() == c.nrows(),
        support_count: support.len(),
        blocking_sensor,
        fragile,
    })
}

/// Place the requested poles and certify that the closed loop is maximally
/// resilient: rejects any pole whose forced eigenvector is invisible to some
/// sensor, then verifies that every closed-loop eigenvector image under C
/// has full support. For small sensor counts the maximum correctable error
/// count is additionally confirmed by subset enumeration.
pub fn design_resilient_feedback(
    system: &LinearSystem,
    spec: &PoleSpec,
) -> Result<FeedbackDesign, Error> {
    let b = single_input_column(system.b())?;
    let (a, c) = (system.a(), system.c());
    let n = system.n();
    if spec.len() != n {
        return Err(Error::Dimension(format!("need exactly {n} poles, got {}", spec.len())));
    }

    for &lambda in spec.poles() {
        let probe = check_pole_admissibility(a, &b, c, lambda)?;
        if !probe.admissible {
            return Err(Error::InadmissiblePole {
                pole: (lambda.re, lambda.im),
                sensor: probe.blocking_sensor,
                suggestion: (lambda.re * 1.001, lambda.im * 1.001),
            });
        }
    }

    let placement = place_poles(a, &b, spec)?;
    let mut warnings: Vec<String> = placement.warning.iter().cloned().collect();
    let mismatch = spectrum_mismatch(&placement.achieved_poles, spec.poles());
    let tau_eig = 1e-8 * (1.0 + a.norm());
    if mismatch > tau_eig {
        warnings.push(format!(
            "achieved poles deviate from the request by {mismatch:.3e} (tolerance {tau_eig:.3e})"
        ));
    }

    let closed = a + &b * &placement.gain;
    let mut eigenvector_supports = Vec::with_capacity(n);
    let mut all_full = true;
    for &lambda in &placement.achieved_poles {
        let v = linalg::eigenvector_for(&closed, lambda);
        let image = c.map(|x| Complex::new(x, 0.0)) * v;
        let mags: DVector<f64> = image.map(|z| z.norm());
        let count = model::vector_support(&mags).len();
        all_full &= count == system.p();
        eigenvector_supports.push(count);
    }

    // Cross-check against subset enumeration while it is cheap.
    let verified_q_max = if system.p() <= 8 {
        let closed_sys = LinearSystem::new(closed.clone(), system.b().clone(), c.clone())?;
        Some(resilience::max_correctable_sensor_errors(&closed_sys, n, false)?.q_max)
    } else {
        None
    };

    Ok(FeedbackDesign {
        gain: placement.gain.iter().copied().collect(),
        achieved_poles: placement.achieved_poles.iter().map(|l| (l.re, l.im)).collect(),
        eigenvector_supports,
        resilience_verified: all_full && mismatch <= tau_eig,
        verified_q_max,
        warnings,
    })
}
