//! Linearized swing-equation model builder for generator/bus networks.
//!
//! Starting from a network description (buses, susceptance-weighted
//! branches, generators with inertia and damping), the builder forms the
//! susceptance Laplacian, eliminates the load buses by Kron reduction, and
//! discretizes `M dd/dt2 = -D dd/dt - L_red d + P_mech` by forward Euler.
//! States are ordered (rotor angles, then frequencies). Sensors: one power
//! injection per bus, one power flow per branch, and the rotor angle of the
//! first generator as the last row. Actuators: mechanical power input per
//! generator.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg;
use crate::model::LinearSystem;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    /// Susceptance, per unit; parallel branches add.
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    /// Inertia constant, per-unit-seconds.
    pub inertia: f64,
    /// Damping coefficient, per-unit.
    pub damping: f64,
}

/// Validated generator/bus network with a sampling time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDescription {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// Sample time in seconds for the forward-Euler discretization.
    pub dt: f64,
    /// Free-form provenance note carried through from the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl NetworkDescription {
    pub fn validate(&self) -> Result<(), Error> {
        if self.buses.is_empty() {
            return Err(Error::Schema("buses: list must be nonempty".into()));
        }
        let mut ids = BTreeSet::new();
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                return Err(Error::Schema(format!("buses: duplicate id {}", bus.id)));
            }
        }
        if self.generators.is_empty() {
            return Err(Error::Schema("generators: list must be nonempty".into()));
        }
        let mut gen_buses = BTreeSet::new();
        for (i, g) in self.generators.iter().enumerate() {
            if !ids.contains(&g.bus) {
                return Err(Error::Schema(format!(
                    "generators[{i}].bus: {} is not a bus id",
                    g.bus
                )));
            }
            if !gen_buses.insert(g.bus) {
                return Err(Error::Schema(format!(
                    "generators[{i}].bus: duplicate generator at bus {}",
                    g.bus
                )));
            }
            if !(g.inertia > 0.0) {
                return Err(Error::Schema(format!("generators[{i}].inertia: must be positive")));
            }
            if !(g.damping >= 0.0) {
                return Err(Error::Schema(format!(
                    "generators[{i}].damping: must be nonnegative"
                )));
            }
        }
        for (i, br) in self.branches.iter().enumerate() {
            if !ids.contains(&br.from) {
                return Err(Error::Schema(format!("branches[{i}].from: {} is not a bus id", br.from)));
            }
            if !ids.contains(&br.to) {
                return Err(Error::Schema(format!("branches[{i}].to: {} is not a bus id", br.to)));
            }
            if br.from == br.to {
                return Err(Error::Schema(format!("branches[{i}]: self-loop at bus {}", br.from)));
            }
            if !(br.b > 0.0) {
                return Err(Error::Schema(format!("branches[{i}].b: must be positive")));
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::Schema("dt: must be positive".into()));
        }
        // Connectivity over the branch graph.
        if self.buses.len() > 1 {
            let index: BTreeMap<u32, usize> =
                self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
            let mut adjacency = vec![Vec::new(); self.buses.len()];
            for br in &self.branches {
                let (f, t) = (index[&br.from], index[&br.to]);
                adjacency[f].push(t);
                adjacency[t].push(f);
            }
            let mut seen = vec![false; self.buses.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(v) = stack.pop() {
                for &w in &adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::Schema("branches: bus graph is not connected".into()));
            }
        }
        Ok(())
    }
}

/// Discretized swing model with labeled sensors and actuators.
#[derive(Debug, Clone)]
pub struct SwingModel {
    pub system: LinearSystem,
    pub sensor_labels: Vec<String>,
    pub actuator_labels: Vec<String>,
    pub warnings: Vec<String>,
}

/// Load and validate a network description file.
pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkDescription, Error> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let net: NetworkDescription =
        serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    net.validate()?;
    Ok(net)
}

/// The 14-bus description bundled with the crate (susceptances from the
/// standard published line reactances; inertia, damping and dt are repo
/// choices, documented in the file itself).
pub fn bundled_ieee14() -> NetworkDescription {
    let net: NetworkDescription = serde_json::from_str(include_str!("../data/ieee14.json"))
        .expect("bundled network parses");
    net.validate().expect("bundled network is valid");
    net
}

/// Build the discrete-time swing model for a network.
pub fn build_swing_system(net: &NetworkDescription) -> Result<SwingModel, Error> {
    net.validate()?;
    let num_buses = self::bus_count(net);
    let index: BTreeMap<u32, usize> =
        net.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let g = net.generators.len();

    // Susceptance-weighted Laplacian over all buses.
    let mut laplacian = DMatrix::zeros(num_buses, num_buses);
    for br in &net.branches {
        let (f, t) = (index[&br.from], index[&br.to]);
        laplacian[(f, f)] += br.b;
        laplacian[(t, t)] += br.b;
        laplacian[(f, t)] -= br.b;
        laplacian[(t, f)] -= br.b;
    }

    // Partition into generator and load buses (generator order follows the
    // description).
    let gen_idx: Vec<usize> = net.generators.iter().map(|gen| index[&gen.bus]).collect();
    let load_idx: Vec<usize> =
        (0..num_buses).filter(|i| !gen_idx.contains(i)).collect();
    let pick = |rows: &[usize], cols: &[usize]| -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| laplacian[(rows[i], cols[j])])
    };
    let l_gg = pick(&gen_idx, &gen_idx);
    let l_gr = pick(&gen_idx, &load_idx);
    let l_rg = pick(&load_idx, &gen_idx);
    let l_rr = pick(&load_idx, &load_idx);

    // Kron reduction: load buses carry no dynamics and no injections.
    let (l_red, load_recovery) = if load_idx.is_empty() {
        (l_gg, DMatrix::zeros(0, g))
    } else {
        let l_rr_inv_l_rg = l_rr
            .clone()
            .lu()
            .solve(&l_rg)
            .ok_or_else(|| Error::Schema("load-bus Laplacian block is singular".into()))?;
        (l_gg - &l_gr * &l_rr_inv_l_rg, -l_rr_inv_l_rg)
    };

    // Angle reconstruction map: bus angles (original order) from generator
    // angles.
    let mut theta_map = DMatrix::zeros(num_buses, g);
    for (gi, &bus) in gen_idx.iter().enumerate() {
        theta_map[(bus, gi)] = 1.0;
    }
    for (li, &bus) in load_idx.iter().enumerate() {
        for gi in 0..g {
            theta_map[(bus, gi)] = load_recovery[(li, gi)];
        }
    }

    // Forward-Euler discretization of M ddot = -D dot - L_red d + p.
    let n = 2 * g;
    let dt = net.dt;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..g {
        a[(i, i)] = 1.0;
        a[(i, g + i)] = dt;
    }
    for i in 0..g {
        let m_i = net.generators[i].inertia;
        for j in 0..g {
            a[(g + i, j)] = -dt * l_red[(i, j)] / m_i;
        }
        a[(g + i, g + i)] = 1.0 - dt * net.generators[i].damping / m_i;
    }
    // Mechanical power disturbance enters the frequency rows.
    let mut b = DMatrix::zeros(n, g);
    for i in 0..g {
        b[(g + i, i)] = dt / net.generators[i].inertia;
    }

    // Sensors: injections per bus, flows per branch, first rotor angle last.
    let p_count = num_buses + net.branches.len() + 1;
    let mut c = DMatrix::zeros(p_count, n);
    let mut sensor_labels = Vec::with_capacity(p_count);
    let injections = &laplacian * &theta_map; // zero on load rows by construction
    for (row, bus) in net.buses.iter().enumerate() {
        for j in 0..g {
            c[(row, j)] = injections[(row, j)];
        }
        sensor_labels.push(format!("injection:bus{}", bus.id));
    }
    for (bi, br) in net.branches.iter().enumerate() {
        let row = num_buses + bi;
        let (f, t) = (index[&br.from], index[&br.to]);
        for j in 0..g {
            c[(row, j)] = br.b * (theta_map[(f, j)] - theta_map[(t, j)]);
        }
        sensor_labels.push(format!("flow:{}-{}", br.from, br.to));
    }
    c[(p_count - 1, 0)] = 1.0;
    sensor_labels.push(format!("angle:gen@bus{}", net.generators[0].bus));

    let actuator_labels = net
        .generators
        .iter()
        .map(|gen| format!("mech-power:gen@bus{}", gen.bus))
        .collect();

    let system = LinearSystem::new(a, b, c)?;
    let mut warnings = Vec::new();
    let radius = linalg::spectral_radius(system.a());
    if radius > 1.05 {
        warnings.push(format!(
            "discretized dynamics have spectral radius {radius:.4}; dt = {dt} may be too coarse"
        ));
    }
    Ok(SwingModel { system, sensor_labels, actuator_labels, warnings })
}

fn bus_count(net: &NetworkDescription) -> usize {
    net.buses.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;
    use nalgebra::DVector;

    fn single_generator_net(dt: f64) -> NetworkDescription {
        NetworkDescription {
            buses: vec![Bus { id: 1 }],
            branches: vec![],
            generators: vec![Generator { bus: 1, inertia: 2.0, damping: 0.5 }],
            dt,
            description: None,
        }
    }

    #[test]
    fn single_generator_matches_hand_linearization() {
        let dt = 0.02;
        let model = build_swing_system(&single_generator_net(dt)).unwrap();
        let sys = &model.system;
        assert_eq!(sys.n(), 2);
        assert_eq!(sys.m(), 1);
        assert_eq!(sys.p(), 2); // one injection sensor + the rotor angle
        let a = sys.a();
        assert!((a[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((a[(0, 1)] - dt).abs() < 1e-15);
        assert!(a[(1, 0)].abs() < 1e-15); // no coupling without branches
        assert!((a[(1, 1)] - (1.0 - dt * 0.5 / 2.0)).abs() < 1e-15);
        assert!((sys.b()[(1, 0)] - dt / 2.0).abs() < 1e-15);
        // Injection sensor sees nothing (no branches); angle sensor sees d1.
        assert!(sys.c().row(0).amax() < 1e-15);
        assert_eq!(sys.c()[(1, 0)], 1.0);
    }

    #[test]
    fn two_generators_one_branch_eigenstructure() {
        let net = NetworkDescription {
            buses: vec![Bus { id: 1 }, Bus { id: 2 }],
            branches: vec![Branch { from: 1, to: 2, b: 3.0 }],
            generators: vec![
                Generator { bus: 1, inertia: 1.0, damping: 0.1 },
                Generator { bus: 2, inertia: 1.0, damping: 0.1 },
            ],
            dt: 0.01,
            description: None,
        };
        let model = build_swing_system(&net).unwrap();
        let a = model.system.a();

        // Common mode (1,1,0,0): angles drift together, eigenvalue 1.
        let common = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        assert!((a * &common - &common).amax() < 1e-14);

        // Difference subspace matches the 2x2 block analysis with Laplacian
        // eigenvalue 2b: [[1, dt], [-2b dt, 1 - 0.1 dt]].
        let block = nalgebra::dmatrix![1.0, 0.01; -2.0 * 3.0 * 0.01, 1.0 - 0.1 * 0.01];
        let block_eigs = crate::linalg::eigenvalues(&block);
        let full_eigs = crate::linalg::eigenvalues(a);
        for be in &block_eigs {
            let hit = full_eigs.iter().any(|fe| (fe - be).norm() < 1e-10);
            assert!(hit, "difference-mode eigenvalue {be} missing from the full model");
        }
        // The difference mode decays while the common mode does not.
        assert!(block_eigs.iter().all(|e| e.norm() < 1.0));
    }

    #[test]
    fn bundled_network_shape_and_observability() {
        let net = bundled_ieee14();
        assert_eq!(net.buses.len(), 14);
        assert_eq!(net.branches.len(), 20);
        assert_eq!(net.generators.len(), 5);
        let model = build_swing_system(&net).unwrap();
        assert_eq!(model.system.n(), 10);
        assert_eq!(model.system.m(), 5);
        assert_eq!(model.system.p(), 35);
        assert!(model.warnings.is_empty(), "{:?}", model.warnings);
        assert_eq!(model.sensor_labels.len(), 35);
        assert_eq!(model.sensor_labels[34], "angle:gen@bus1");

        // Observable with the rotor-angle sensor...
        let obs = model::observability_matrix(&model.system, 10).unwrap();
        assert_eq!(crate::linalg::rank(&obs), 10);
        // ...and unobservable without it.
        let c_trunc = model.system.c().rows(0, 34).into_owned();
        let trimmed =
            LinearSystem::autonomous(model.system.a().clone(), c_trunc).unwrap();
        let obs = model::observability_matrix(&trimmed, 10).unwrap();
        assert!(crate::linalg::rank(&obs) < 10);
    }

    #[test]
    fn reduced_laplacian_properties_and_kirchhoff() {
        let net = bundled_ieee14();
        let model = build_swing_system(&net).unwrap();
        let sys = &model.system;
        let g = 5;

        // The frequency rows encode -dt L_red: recover L_red and check
        // symmetry, positive semidefiniteness, and the all-ones kernel.
        let dt = net.dt;
        let mut l_red = DMatrix::zeros(g, g);
        for i in 0..g {
            for j in 0..g {
                l_red[(i, j)] = -sys.a()[(g + i, j)] * net.generators[i].inertia / dt;
            }
        }
        assert!((l_red.clone() - l_red.transpose()).amax() < 1e-9);
        let ones = DVector::from_element(g, 1.0);
        assert!((&l_red * &ones).amax() < 1e-9);
        let eigs = l_red.clone().symmetric_eigen().eigenvalues;
        assert!(eigs.iter().all(|&e| e > -1e-9));
        assert_eq!(eigs.iter().filter(|&&e| e.abs() < 1e-9).count(), 1);

        // Kirchhoff: signed flow rows around a cycle cancel on angle states.
        // Cycle in the 14-bus graph: 1-2, 2-5, 5-1 (branch indices 0, 4, 1).
        let flows = |bi: usize| sys.c().row(14 + bi).columns(0, g).into_owned();
        let cycle = flows(0) / net.branches[0].b + flows(4) / net.branches[4].b
            - flows(1) / net.branches[1].b;
        assert!(cycle.amax() < 1e-9, "cycle sum {:?}", cycle);
    }

    #[test]
    fn schema_validation_errors() {
        let mut net = single_generator_net(0.01);
        net.buses.clear();
        assert!(matches!(net.validate(), Err(Error::Schema(m)) if m.contains("buses")));

        let mut net = bundled_ieee14();
        net.branches.push(Branch { from: 1, to: 99, b: 1.0 });
        assert!(matches!(net.validate(), Err(Error::Schema(m)) if m.contains("not a bus id")));

        let mut net = bundled_ieee14();
        net.generators[0].inertia = 0.0;
        assert!(matches!(net.validate(), Err(Error::Schema(m)) if m.contains("inertia")));

        // Disconnected graph.
        let net = NetworkDescription {
            buses: vec![Bus { id: 1 }, Bus { id: 2 }, Bus { id: 3 }],
            branches: vec![Branch { from: 1, to: 2, b: 1.0 }],
            generators: vec![Generator { bus: 1, inertia: 1.0, damping: 0.1 }],
            dt: 0.01,
            description: None,
        };
        assert!(matches!(net.validate(), Err(Error::Schema(m)) if m.contains("connected")));
    }

    #[test]
    fn parallel_branches_add_susceptance() {
        let double = NetworkDescription {
            buses: vec![Bus { id: 1 }, Bus { id: 2 }],
            branches: vec![
                Branch { from: 1, to: 2, b: 2.0 },
                Branch { from: 1, to: 2, b: 3.0 },
            ],
            generators: vec![
                Generator { bus: 1, inertia: 1.0, damping: 0.1 },
                Generator { bus: 2, inertia: 1.0, damping: 0.1 },
            ],
            dt: 0.01,
            description: None,
        };
        let merged = NetworkDescription {
            branches: vec![Branch { from: 1, to: 2, b: 5.0 }],
            ..double.clone()
        };
        let a_double = build_swing_system(&double).unwrap().system.a().clone();
        let a_merged = build_swing_system(&merged).unwrap().system.a().clone();
        assert!((a_double - a_merged).amax() < 1e-12);
    }
}
