//! Plant representation and the linear maps every other module consumes.
//!
//! The plant is the discrete-time system
//!
//! ```text
//! x(t+1) = A x(t) + B (u(t) + w(t))        w: actuator attack
//! y(t)   = C x(t) + e(t)                   e: sensor attack
//! ```
//!
//! with a constant (unknown) set of attacked sensors `K` and actuators `L`:
//! every column of the attack matrices is supported inside its set.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Relative threshold below which an entry counts as numerically zero.
///
/// `block_max` is the largest magnitude in the containing block (vector,
/// matrix, or residual being classified).
pub fn support_threshold(block_max: f64) -> f64 {
    1e-9 * block_max.max(1.0)
}

/// Indices of numerically nonzero entries of a vector.
pub fn vector_support(v: &DVector<f64>) -> BTreeSet<usize> {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = support_threshold(max);
    v.iter().enumerate().filter(|(_, x)| x.abs() > tol).map(|(i, _)| i).collect()
}

/// Indices of numerically nonzero rows of a matrix (threshold relative to the
/// largest magnitude in the whole matrix).
pub fn row_support(m: &DMatrix<f64>) -> BTreeSet<usize> {
    let max = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let tol = support_threshold(max);
    (0..m.nrows())
        .filter(|&i| m.row(i).iter().any(|x| x.abs() > tol))
        .collect()
}

/// Indices of exactly nonzero rows (used to validate stored attack data,
/// where entries are given rather than computed).
pub fn exact_row_support(m: &DMatrix<f64>) -> BTreeSet<usize> {
    (0..m.nrows())
        .filter(|&i| m.row(i).iter().any(|&x| x != 0.0))
        .collect()
}

/// A discrete-time linear plant (A, B, C) with consistent dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl LinearSystem {
    /// Build a plant, validating dimension consistency and finiteness.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self, Error> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B must have {} rows to match A, got {}",
                n,
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C must have {} columns to match A, got {}",
                n,
                c.ncols()
            )));
        }
        if c.nrows() == 0 {
            return Err(Error::Dimension("output dimension must be positive".into()));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("matrix {name} contains NaN or infinity")));
            }
        }
        Ok(LinearSystem { a, b, c })
    }

    /// Plant without inputs (B is n x 0).
    pub fn autonomous(a: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self, Error> {
        let n = a.nrows();
        Self::new(a, DMatrix::zeros(n, 0), c)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Closed-loop plant under static state feedback `u = K x`: replaces A by
    /// A + B K and keeps B, C.
    pub fn with_state_feedback(&self, k: &DMatrix<f64>) -> Result<Self, Error> {
        if k.nrows() != self.m() || k.ncols() != self.n() {
            return Err(Error::Dimension(format!(
                "gain must be {}x{}, got {}x{}",
                self.m(),
                self.n(),
                k.nrows(),
                k.ncols()
            )));
        }
        LinearSystem::new(&self.a + &self.b * k, self.b.clone(), self.c.clone())
    }
}

/// Sensor/actuator attack over a horizon: constant attacked sets and the
/// injected signal matrices (dense even when sparse; instances are
/// desk-scale).
#[derive(Debug, Clone, PartialEq)]
pub struct AttackScenario {
    sensor_set: BTreeSet<usize>,
    actuator_set: BTreeSet<usize>,
    e: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl AttackScenario {
    /// Validate that the signals live inside the declared attacked sets and
    /// the horizons are consistent (`e` is p x T, `w` is m x (T-1)).
    pub fn new(
        sensor_set: BTreeSet<usize>,
        actuator_set: BTreeSet<usize>,
        e: DMatrix<f64>,
        w: DMatrix<f64>,
    ) -> Result<Self, Error> {
        let t = e.ncols();
        if t == 0 {
            return Err(Error::Dimension("attack horizon must be at least 1".into()));
        }
        if w.ncols() + 1 != t {
            return Err(Error::Dimension(format!(
                "actuator signal must span {} steps (horizon - 1), got {}",
                t - 1,
                w.ncols()
            )));
        }
        if let Some(&i) = sensor_set.iter().next_back() {
            if i >= e.nrows() {
                return Err(Error::Dimension(format!(
                    "sensor index {} out of range for {} sensors",
                    i + 1,
                    e.nrows()
                )));
            }
        }
        if let Some(&j) = actuator_set.iter().next_back() {
            if j >= w.nrows() {
                return Err(Error::Dimension(format!(
                    "actuator index {} out of range for {} actuators",
                    j + 1,
                    w.nrows()
                )));
            }
        }
        if !exact_row_support(&e).is_subset(&sensor_set) {
            return Err(Error::Dimension(
                "sensor attack signal has nonzero rows outside the attacked set".into(),
            ));
        }
        if !exact_row_support(&w).is_subset(&actuator_set) {
            return Err(Error::Dimension(
                "actuator attack signal has nonzero rows outside the attacked set".into(),
            ));
        }
        for (name, m) in [("E", &e), ("W", &w)] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("attack matrix {name} contains NaN or infinity")));
            }
        }
        Ok(AttackScenario { sensor_set, actuator_set, e, w })
    }

    /// The attack-free scenario for `p` sensors and `m` actuators.
    pub fn none(p: usize, m: usize, horizon: usize) -> Self {
        AttackScenario {
            sensor_set: BTreeSet::new(),
            actuator_set: BTreeSet::new(),
            e: DMatrix::zeros(p, horizon),
            w: DMatrix::zeros(m, horizon.saturating_sub(1)),
        }
    }

    /// Sensor-only attack with the set inferred from the signal.
    pub fn sensors(e: DMatrix<f64>, m: usize) -> Result<Self, Error> {
        let horizon = e.ncols();
        Self::new(exact_row_support(&e), BTreeSet::new(), e, DMatrix::zeros(m, horizon.saturating_sub(1)))
    }

    pub fn horizon(&self) -> usize {
        self.e.ncols()
    }

    pub fn sensor_set(&self) -> &BTreeSet<usize> {
        &self.sensor_set
    }

    pub fn actuator_set(&self) -> &BTreeSet<usize> {
        &self.actuator_set
    }

    /// p x T sensor-attack matrix (column t is e(t)).
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// m x (T-1) actuator-attack matrix (column t is w(t)).
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
}

/// The p x T block of stacked outputs; column t is y(t).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBlock {
    y: DMatrix<f64>,
}

impl MeasurementBlock {
    pub fn new(y: DMatrix<f64>) -> Result<Self, Error> {
        if y.ncols() == 0 || y.nrows() == 0 {
            return Err(Error::Dimension("measurement block must be nonempty".into()));
        }
        Ok(MeasurementBlock { y })
    }

    pub fn horizon(&self) -> usize {
        self.y.ncols()
    }

    pub fn p(&self) -> usize {
        self.y.nrows()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Restrict to the first `t` time steps.
    pub fn prefix(&self, t: usize) -> Result<Self, Error> {
        if t == 0 || t > self.horizon() {
            return Err(Error::Dimension(format!(
                "prefix length {t} out of range 1..={}",
                self.horizon()
            )));
        }
        Ok(MeasurementBlock { y: self.y.columns(0, t).into_owned() })
    }
}

/// State and applied-input history of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// n x T state history; column t is x(t).
    pub states: DMatrix<f64>,
    /// m x (T-1) nominal inputs actually commanded (attacks excluded).
    pub inputs: DMatrix<f64>,
}

/// Run the plant forward for `attack.horizon()` steps from `x0` under nominal
/// `inputs` (m x (T-1)), adding actuator attacks to the inputs and sensor
/// attacks to the outputs.
pub fn simulate(
    system: &LinearSystem,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    attack: &AttackScenario,
) -> Result<(Trajectory, MeasurementBlock), Error> {
    let (n, m, p) = (system.n(), system.m(), system.p());
    let t_len = attack.horizon();
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 must have {} entries, got {}", n, x0.len())));
    }
    if inputs.nrows() != m || inputs.ncols() + 1 != t_len {
        return Err(Error::Dimension(format!(
            "inputs must be {}x{}, got {}x{}",
            m,
            t_len - 1,
            inputs.nrows(),
            inputs.ncols()
        )));
    }
    if attack.e().nrows() != p || attack.w().nrows() != m {
        return Err(Error::Dimension(format!(
            "attack signals sized for {}x{} but plant has p={}, m={}",
            attack.e().nrows(),
            attack.w().nrows(),
            p,
            m
        )));
    }

    let mut states = DMatrix::zeros(n, t_len);
    let mut outputs = DMatrix::zeros(p, t_len);
    let mut x = x0.clone();
    for t in 0..t_len {
        states.set_column(t, &x);
        let y = system.c() * &x + attack.e().column(t);
        outputs.set_column(t, &y);
        if t + 1 < t_len {
            let u = inputs.column(t) + attack.w().column(t);
            x = system.a() * &x + system.b() * u;
        }
    }
    Ok((
        Trajectory { states, inputs: inputs.clone() },
        MeasurementBlock::new(outputs)?,
    ))
}

/// Stacked output map over `horizon` steps: `[C; CA; ...; CA^(T-1)]`
/// (pT x n). Powers of A are accumulated incrementally.
pub fn observability_matrix(system: &LinearSystem, horizon: usize) -> Result<DMatrix<f64>, Error> {
    if horizon == 0 {
        return Err(Error::Dimension("horizon must be at least 1".into()));
    }
    let (n, p) = (system.n(), system.p());
    let mut stacked = DMatrix::zeros(p * horizon, n);
    let mut block = system.c().clone();
    for t in 0..horizon {
        stacked.view_mut((t * p, 0), (p, n)).copy_from(&block);
        if t + 1 < horizon {
            block = &block * system.a();
        }
    }
    Ok(stacked)
}

/// The p x T image of a state under the output map: column t is `C A^t z`.
pub fn phi_map(system: &LinearSystem, horizon: usize, z: &DVector<f64>) -> Result<DMatrix<f64>, Error> {
    if horizon == 0 {
        return Err(Error::Dimension("horizon must be at least 1".into()));
    }
    if z.len() != system.n() {
        return Err(Error::Dimension(format!(
            "state must have {} entries, got {}",
            system.n(),
            z.len()
        )));
    }
    let p = system.p();
    let mut image = DMatrix::zeros(p, horizon);
    let mut v = z.clone();
    for t in 0..horizon {
        image.set_column(t, &(system.c() * &v));
        if t + 1 < horizon {
            v = system.a() * v;
        }
    }
    Ok(image)
}

/// Contribution of known inputs to the outputs: column t is
/// `C * sum_{s<t} A^(t-1-s) B u(s)` (column 0 is zero).
pub fn input_effect(system: &LinearSystem, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let horizon = inputs.ncols() + 1;
    if inputs.nrows() != system.m() {
        return Err(Error::Dimension(format!(
            "inputs must have {} rows, got {}",
            system.m(),
            inputs.nrows()
        )));
    }
    let p = system.p();
    let mut effect = DMatrix::zeros(p, horizon);
    let mut x = DVector::zeros(system.n());
    for t in 0..horizon {
        effect.set_column(t, &(system.c() * &x));
        if t + 1 < horizon {
            x = system.a() * x + system.b() * inputs.column(t);
        }
    }
    Ok(effect)
}

/// Remove the known-input contribution from measurements; the result obeys
/// the autonomous model with the same attacks, whatever control law produced
/// the inputs.
pub fn compensate(
    y: &MeasurementBlock,
    system: &LinearSystem,
    inputs: &DMatrix<f64>,
) -> Result<MeasurementBlock, Error> {
    if y.p() != system.p() {
        return Err(Error::Dimension(format!(
            "measurements have {} rows but plant has p={}",
            y.p(),
            system.p()
        )));
    }
    if inputs.ncols() + 1 != y.horizon() {
        return Err(Error::Dimension(format!(
            "inputs must span {} steps, got {}",
            y.horizon() - 1,
            inputs.ncols()
        )));
    }
    let effect = input_effect(system, inputs)?;
    MeasurementBlock::new(y.y() - effect)
}

/// n x n circular permutation matrix (shift-up): `A e_(i+1) = e_i`,
/// `A e_1 = e_n`. Used across tests as the canonical maximal-resilience
/// dynamics.
pub fn circular_permutation(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if (i + 1) % n == j { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn ident_system(n: usize) -> LinearSystem {
        LinearSystem::new(DMatrix::identity(n, n), DMatrix::zeros(n, 0), DMatrix::identity(n, n))
            .unwrap()
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let a = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::<f64>::zeros(3, 1);
        let c = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(LinearSystem::new(a, b, c), Err(Error::Dimension(_))));

        let a = dmatrix![1.0, f64::NAN; 0.0, 1.0];
        let err = LinearSystem::autonomous(a, DMatrix::identity(2, 2));
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn simulate_zero_everything_is_zero() {
        let sys = ident_system(2);
        let attack = AttackScenario::none(2, 0, 3);
        let (traj, y) = simulate(&sys, &dvector![0.0, 0.0], &DMatrix::zeros(0, 2), &attack).unwrap();
        assert!(traj.states.iter().all(|&x| x == 0.0));
        assert!(y.y().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn simulate_identity_holds_state() {
        let sys = ident_system(2);
        let attack = AttackScenario::none(2, 0, 3);
        let (_, y) = simulate(&sys, &dvector![1.0, 0.0], &DMatrix::zeros(0, 2), &attack).unwrap();
        for t in 0..3 {
            assert_eq!(y.y().column(t), dvector![1.0, 0.0].column(0));
        }
    }

    #[test]
    fn simulate_swap_with_sensor_attack() {
        // A swaps coordinates; a constant attack (5, 0) lands on sensor 1.
        let sys = LinearSystem::autonomous(dmatrix![0.0, 1.0; 1.0, 0.0], DMatrix::identity(2, 2))
            .unwrap();
        let e = dmatrix![5.0, 5.0; 0.0, 0.0];
        let attack = AttackScenario::sensors(e, 0).unwrap();
        let (_, y) = simulate(&sys, &dvector![1.0, 2.0], &DMatrix::zeros(0, 1), &attack).unwrap();
        assert_eq!(y.y(), &dmatrix![6.0, 7.0; 2.0, 1.0]);

        // Independent per-step recursion as an oracle.
        let mut x = dvector![1.0, 2.0];
        for t in 0..2 {
            let expected = &x + dvector![5.0, 0.0];
            assert_eq!(y.y().column(t), expected.column(0));
            x = dvector![x[1], x[0]];
        }
    }

    #[test]
    fn observability_matrix_examples() {
        let sys = ident_system(3);
        assert_eq!(observability_matrix(&sys, 1).unwrap(), DMatrix::identity(3, 3));

        let nilpotent = LinearSystem::autonomous(
            dmatrix![0.0, 1.0; 0.0, 0.0],
            dmatrix![1.0, 0.0],
        )
        .unwrap();
        assert_eq!(
            observability_matrix(&nilpotent, 2).unwrap(),
            DMatrix::identity(2, 2)
        );
    }

    #[test]
    fn phi_map_matches_observability_matrix() {
        let a = dmatrix![0.3, -0.2, 0.0; 0.5, 0.1, -0.4; 0.0, 0.7, 0.2];
        let c = dmatrix![1.0, 0.0, 2.0; 0.0, -1.0, 1.0];
        let sys = LinearSystem::autonomous(a, c).unwrap();
        let z = dvector![1.0, 0.0, 0.0];
        let horizon = 4;
        let image = phi_map(&sys, horizon, &z).unwrap();
        let stacked = observability_matrix(&sys, horizon).unwrap() * &z;
        for t in 0..horizon {
            for i in 0..sys.p() {
                assert!((image[(i, t)] - stacked[t * sys.p() + i]).abs() < 1e-14);
            }
        }
        assert!(phi_map(&sys, 3, &DVector::zeros(3)).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn phi_map_circular_permutation_rows_are_permutations() {
        let n = 5;
        let sys = LinearSystem::autonomous(circular_permutation(n), DMatrix::identity(n, n))
            .unwrap();
        let z = dvector![1.0, -2.0, 3.0, 0.5, -0.25];
        let image = phi_map(&sys, n, &z).unwrap();
        // Every row holds the same multiset of values.
        let canon = |row: Vec<f64>| {
            let mut r = row;
            r.sort_by(|a, b| a.partial_cmp(b).unwrap());
            r
        };
        let first = canon(image.row(0).iter().copied().collect());
        for i in 1..n {
            assert_eq!(canon(image.row(i).iter().copied().collect()), first);
        }
    }

    #[test]
    fn input_effect_scalar_recursion() {
        let sys = LinearSystem::new(
            dmatrix![2.0],
            dmatrix![1.0],
            dmatrix![1.0],
        )
        .unwrap();
        let u = dmatrix![1.0, 1.0];
        let effect = input_effect(&sys, &u).unwrap();
        assert_eq!(effect, dmatrix![0.0, 1.0, 3.0]);

        assert!(input_effect(&sys, &DMatrix::zeros(1, 2)).unwrap().iter().all(|&x| x == 0.0));
        let no_b = LinearSystem::new(dmatrix![2.0], dmatrix![0.0], dmatrix![1.0]).unwrap();
        assert!(input_effect(&no_b, &u).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn compensate_recovers_autonomous_model() {
        let a = dmatrix![0.9, 0.2; -0.1, 0.8];
        let b = dmatrix![1.0; 0.5];
        let c = dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0];
        let sys = LinearSystem::new(a, b, c).unwrap();
        let x0 = dvector![1.0, -1.0];
        let u = dmatrix![0.4, -0.3, 0.2];
        let mut e = DMatrix::zeros(3, 4);
        e[(2, 0)] = 7.0;
        e[(2, 2)] = -3.0;
        let attack = AttackScenario::sensors(e.clone(), 1).unwrap();

        let (_, y) = simulate(&sys, &x0, &u, &attack).unwrap();
        let compensated = compensate(&y, &sys, &u).unwrap();

        // Compensated data equals the autonomous image plus the raw attack.
        let expected = phi_map(&sys, 4, &x0).unwrap() + &e;
        assert!((compensated.y() - &expected).norm() < 1e-12);

        // Same attacks with zero inputs give the identical block.
        let (_, y0) = simulate(&sys, &x0, &DMatrix::zeros(1, 3), &attack).unwrap();
        assert!((compensated.y() - y0.y()).norm() < 1e-10);

        // No inputs: compensation is the identity.
        let same = compensate(&y, &sys, &DMatrix::zeros(1, 3)).unwrap();
        assert_eq!(same.y(), y.y());
    }

    #[test]
    fn cayley_hamilton_support_bound() {
        // Nilpotent case: images vanish for t >= n, so the bound is strict.
        let nil = LinearSystem::autonomous(dmatrix![0.0, 1.0; 0.0, 0.0], DMatrix::identity(2, 2))
            .unwrap();
        let z = dvector![0.0, 1.0];
        let image = phi_map(&nil, 5, &z).unwrap();
        let union: BTreeSet<usize> = (0..2)
            .flat_map(|t| vector_support(&image.column(t).into_owned()))
            .collect();
        for t in 2..5 {
            let late = vector_support(&image.column(t).into_owned());
            assert!(late.is_subset(&union));
        }
    }

    #[test]
    fn attack_scenario_validates_supports() {
        let mut e = DMatrix::zeros(3, 2);
        e[(1, 0)] = 4.0;
        let bad = AttackScenario::new(BTreeSet::new(), BTreeSet::new(), e.clone(), DMatrix::zeros(0, 1));
        assert!(bad.is_err());
        let ok = AttackScenario::new([1].into(), BTreeSet::new(), e, DMatrix::zeros(0, 1));
        assert!(ok.is_ok());
    }

    #[test]
    fn measurement_prefix_bounds() {
        let y = MeasurementBlock::new(DMatrix::zeros(2, 4)).unwrap();
        assert_eq!(y.prefix(2).unwrap().horizon(), 2);
        assert!(y.prefix(0).is_err());
        assert!(y.prefix(5).is_err());
    }
}
