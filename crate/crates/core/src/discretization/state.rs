use std::io::Write;
use std::path::Path;

use super::grid::{RhoGrid, SpatialGrid};
use crate::error::{Error, Result};
use crate::model::{coefficients_at, Evaluator, ProblemSpec};

/// Field on Ω-nodes × ρ-nodes, stored row-major by Ω-node.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoField {
    pub n_x: usize,
    pub n_rho: usize,
    pub data: Vec<f64>,
}

impl RhoField {
    pub fn zeros(n_x: usize, n_rho: usize) -> Self {
        Self {
            n_x,
            n_rho,
            data: vec![0.0; n_x * n_rho],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_rho..(i + 1) * self.n_rho]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_rho..(i + 1) * self.n_rho]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_rho + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n_rho + j] = value;
    }

    /// Column at fixed ρ-index `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_x).map(|i| self.at(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.set(i, j, *v);
        }
    }
}

/// Discrete fields at one time level. `u`, `ut` and the rows of `z` live on
/// Ω-nodes (left segment then right segment); `v`, `vt` on the middle segment.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
    pub z: RhoField,
}

impl StateSnapshot {
    pub fn zeros(grid: &SpatialGrid, rho: &RhoGrid) -> Self {
        let n = grid.omega_len();
        let m = grid.middle.len();
        Self {
            t: 0.0,
            u: vec![0.0; n],
            ut: vec![0.0; n],
            v: vec![0.0; m],
            vt: vec![0.0; m],
            z: RhoField::zeros(n, rho.len()),
        }
    }

    /// Velocity trace `z(·, 1)`.
    pub fn delayed_trace(&self) -> Vec<f64> {
        self.z.column(self.z.n_rho - 1)
    }

    pub fn scale(&mut self, s: f64) {
        for f in [&mut self.u, &mut self.ut, &mut self.v, &mut self.vt, &mut self.z.data] {
            f.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Writes `x, segment, displacement, velocity` rows; segment ids 0, 1, 2.
    pub fn write_csv(&self, grid: &SpatialGrid, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,segment,displacement,velocity")?;
        let (ul, ur) = grid.split(&self.u);
        let (utl, utr) = grid.split(&self.ut);
        let rows = [
            (0, &grid.left.nodes, ul, utl),
            (1, &grid.middle.nodes, &self.v[..], &self.vt[..]),
            (2, &grid.right.nodes, ur, utr),
        ];
        for (id, xs, disp, vel) in rows {
            for ((x, d), v) in xs.iter().zip(disp).zip(vel) {
                writeln!(out, "{x},{id},{d:e},{v:e}")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn sample(f: &mut Evaluator, xs: impl Iterator<Item = f64>) -> Result<Vec<f64>> {
    xs.map(|x| f.eval(x, 0.0)).collect()
}

/// Samples the initial data on the grids and fills `z(x, ρ) = f₀(x, -τ(0) ρ)`.
pub fn initialize_state(spec: &ProblemSpec, grid: &SpatialGrid, rho: &RhoGrid) -> Result<StateSnapshot> {
    let geom = &spec.geometry;
    let init = &spec.initial;
    let omega: Vec<f64> = grid.omega_nodes().collect();
    let u = sample(&mut Evaluator::space(&init.u0, geom)?, omega.iter().copied())?;
    let ut = sample(&mut Evaluator::space(&init.u1, geom)?, omega.iter().copied())?;
    let v = sample(&mut Evaluator::space(&init.v0, geom)?, grid.middle.nodes.iter().copied())?;
    let vt = sample(&mut Evaluator::space(&init.v1, geom)?, grid.middle.nodes.iter().copied())?;

    let scale = u
        .iter()
        .chain(&ut)
        .chain(&v)
        .chain(&vt)
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let r = grid.right_offset();
    let last = omega.len() - 1;
    let checks = [
        ("u0(0) = 0", u[0], 0.0),
        ("u0(L3) = 0", u[last], 0.0),
        ("u0(L1) = v0(L1)", u[r - 1], v[0]),
        ("u0(L2) = v0(L2)", u[r], v[v.len() - 1]),
    ];
    for (what, lhs, rhs) in checks {
        if (lhs - rhs).abs() > tol {
            return Err(Error::InconsistentInitialData(format!("{what} violated: {lhs} vs {rhs}")));
        }
    }

    let tau0 = coefficients_at(spec, 0.0).tau;
    let mut history = Evaluator::history(&init.f0, &init.u1, geom)?;
    let mut z = RhoField::zeros(omega.len(), rho.len());
    for (i, &x) in omega.iter().enumerate() {
        let f_now = history.eval(x, 0.0)?;
        if (f_now - ut[i]).abs() > tol.max(1e-10 * f_now.abs()) {
            return Err(Error::InconsistentInitialData(format!(
                "history f0(x, 0) = {f_now} differs from u1(x) = {} at x = {x}",
                ut[i]
            )));
        }
        z.set(i, 0, ut[i]);
        for (j, &rho_j) in rho.nodes.iter().enumerate().skip(1) {
            z.set(i, j, history.eval(x, -tau0 * rho_j)?);
        }
    }

    let mut state = StateSnapshot {
        t: 0.0,
        u,
        ut,
        v,
        vt,
        z,
    };
    // Boundary condition holds exactly, not just to tolerance.
    state.u[0] = 0.0;
    state.u[last] = 0.0;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;
    use crate::model::testing::reference_spec;
    use crate::model::{HistoryFunction, SpaceFunction};

    fn grids(spec: &ProblemSpec) -> (SpatialGrid, RhoGrid) {
        build_grid(&spec.geometry, 0.05, 9).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let mut spec = reference_spec();
        spec.initial = Default::default();
        let (g, r) = grids(&spec);
        let s = initialize_state(&spec, &g, &r).unwrap();
        assert!(s.u.iter().chain(&s.ut).chain(&s.v).chain(&s.vt).all(|x| *x == 0.0));
        assert!(s.z.data.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn constant_velocity_gives_constant_history() {
        let mut spec = reference_spec();
        spec.initial = crate::model::InitialData {
            u1: SpaceFunction::Constant { value: 1.0 },
            ..Default::default()
        };
        let (g, r) = grids(&spec);
        let s = initialize_state(&spec, &g, &r).unwrap();
        assert!(s.z.data.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn cosine_history() {
        let mut spec = reference_spec();
        spec.initial = crate::model::InitialData {
            u1: SpaceFunction::Constant { value: 1.0 },
            f0: HistoryFunction::Expression { expr: "cos(s)".into() },
            ..Default::default()
        };
        let (g, r) = grids(&spec);
        let s = initialize_state(&spec, &g, &r).unwrap();
        let last = r.len() - 1;
        for i in 0..s.z.n_x {
            assert!((s.z.at(i, last) - 0.8775825618903728).abs() < 1e-12);
            assert_eq!(s.z.at(i, 0), s.ut[i]);
        }
    }

    #[test]
    fn incompatible_data_rejected() {
        let mut spec = reference_spec();
        spec.initial.u0 = SpaceFunction::Constant { value: 1.0 };
        let (g, r) = grids(&spec);
        assert!(matches!(
            initialize_state(&spec, &g, &r),
            Err(Error::InconsistentInitialData(_))
        ));

        let mut spec = reference_spec();
        spec.initial.f0 = HistoryFunction::Expression { expr: "1 + s".into() };
        assert!(matches!(
            initialize_state(&spec, &g, &r),
            Err(Error::InconsistentInitialData(_))
        ));
    }

    #[test]
    fn snapshot_csv_lists_every_node() {
        let spec = reference_spec();
        let (g, r) = grids(&spec);
        let s = initialize_state(&spec, &g, &r).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        s.write_csv(&g, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + g.omega_len() + g.middle.len());
        assert!(text.starts_with("x,segment,displacement,velocity"));
    }
}
