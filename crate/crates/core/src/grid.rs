//! Uniform 1D finite-volume grid and the conservative diffusion stencil.
//!
//! Cells `0..n` cover `[0, L]` with spacing `h = L / n`. Face `k` sits between
//! cells `k` and `k + 1`; the two boundary faces carry zero diffusive flux,
//! so boundary sources enter only through [`apply_drug_boundary_flux`].

use crate::error::{param, Error, Result};
use crate::model::{smoothstep, ModelParameters};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    length: f64,
    cells: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(param("grid.length", format!("domain length must be positive, got {length}")));
        }
        if cells < 3 {
            return Err(param("grid.cells", format!("need at least 3 cells, got {cells}")));
        }
        Ok(Self {
            length,
            cells,
            spacing: length / cells as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn center(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.spacing
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|k| self.center(k)).collect()
    }

    /// Position of the interior face between cells `face` and `face + 1`.
    pub fn face(&self, face: usize) -> f64 {
        (face + 1) as f64 * self.spacing
    }
}

/// `base + amplitude * exp(-(x - center)^2 / (2 width^2))` sampled at cell centers.
pub fn gaussian_bump(grid: &Grid1D, center: f64, width: f64, amplitude: f64, base: f64) -> Vec<f64> {
    grid.centers()
        .into_iter()
        .map(|x| {
            let s = (x - center) / width;
            base + amplitude * (-0.5 * s * s).exp()
        })
        .collect()
}

/// Diffusion coefficients on the `n - 1` interior faces of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCoefficients(Vec<f64>);

impl FaceCoefficients {
    /// Wraps raw face values, checking each against the lower bound `floor`.
    pub fn new(values: Vec<f64>, floor: f64) -> Result<Self> {
        for &d in &values {
            if !(d.is_finite() && d >= floor) {
                return Err(Error::ModelViolation {
                    name: "d",
                    value: d,
                    reason: "face diffusion below delta0",
                });
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Evaluates `d(x, t, z)` at each interior face, using the face position and
/// the arithmetic mean of the two adjacent cell values.
pub fn face_diffusion<D>(field: &[f64], d: D, grid: &Grid1D, time: f64, floor: f64) -> Result<FaceCoefficients>
where
    D: Fn(f64, f64, f64) -> f64,
{
    if field.len() != grid.cells() {
        return Err(Error::Dimension(format!(
            "field has {} cells, grid has {}",
            field.len(),
            grid.cells()
        )));
    }
    let values = field
        .windows(2)
        .enumerate()
        .map(|(k, pair)| d(grid.face(k), time, 0.5 * (pair[0] + pair[1])))
        .collect();
    FaceCoefficients::new(values, floor)
}

/// Per-cell rate of `d/dx (d du/dx)` with zero flux through both boundary faces.
pub fn apply_diffusion(field: &[f64], faces: &FaceCoefficients, h: f64) -> Vec<f64> {
    let n = field.len();
    debug_assert_eq!(faces.0.len() + 1, n);
    let inv_h2 = 1.0 / (h * h);
    let mut rate = vec![0.0; n];
    for (k, &d) in faces.0.iter().enumerate() {
        let flux = d * (field[k + 1] - field[k]) * inv_h2;
        rate[k] += flux;
        rate[k + 1] -= flux;
    }
    rate
}

/// Gate values `H(N_boundary - a0_gate)` at the left and right boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryGate {
    pub left: f64,
    pub right: f64,
}

/// Adds the gated injection `v * H(N - a0_gate) / h` to the two boundary cells.
///
/// Returns the gate values that were applied.
pub fn apply_drug_boundary_flux(
    rate: &mut [f64],
    v_left: f64,
    v_right: f64,
    n_left: f64,
    n_right: f64,
    params: &ModelParameters,
    h: f64,
) -> Result<BoundaryGate> {
    for v in [v_left, v_right] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Admissibility(format!("injection rate must be finite and >= 0, got {v}")));
        }
    }
    let gate = BoundaryGate {
        left: smoothstep(n_left - params.gate_threshold, params.gate_width),
        right: smoothstep(n_right - params.gate_threshold, params.gate_width),
    };
    let last = rate.len() - 1;
    rate[0] += v_left * gate.left / h;
    rate[last] += v_right * gate.right / h;
    Ok(gate)
}

/// Solves `(I - dt * D) x = rhs` where `D` is the stencil of [`apply_diffusion`].
///
/// The matrix is symmetric, strictly diagonally dominant for `dt > 0`, so the
/// Thomas algorithm needs no pivoting.
pub fn solve_implicit_diffusion(rhs: &[f64], faces: &FaceCoefficients, h: f64, dt: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    let w: Vec<f64> = faces.0.iter().map(|d| dt * d / (h * h)).collect();
    // off-diagonal entries are -w[k] between rows k and k+1
    let diag = |k: usize| {
        let left = if k > 0 { w[k - 1] } else { 0.0 };
        let right = if k + 1 < n { w[k] } else { 0.0 };
        1.0 + left + right
    };
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag(0);
    if !(denom.abs() > 0.0) {
        return Err(Error::Singular { row: 0 });
    }
    c_prime[0] = if n > 1 { -w[0] / denom } else { 0.0 };
    x[0] = rhs[0] / denom;
    for k in 1..n {
        let sub = -w[k - 1];
        denom = diag(k) - sub * c_prime[k - 1];
        if !(denom.abs() > 0.0) {
            return Err(Error::Singular { row: k });
        }
        c_prime[k] = if k + 1 < n { -w[k] / denom } else { 0.0 };
        x[k] = (rhs[k] - sub * x[k - 1]) / denom;
    }
    for k in (0..n - 1).rev() {
        x[k] -= c_prime[k] * x[k + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid1D::new(2.0, 4).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.centers(), vec![0.25, 0.75, 1.25, 1.75]);
        assert_eq!(g.face(0), 0.5);
        assert!(Grid1D::new(1.0, 2).is_err());
        assert!(Grid1D::new(0.0, 10).is_err());
    }

    #[test]
    fn face_rules() {
        let g = Grid1D::new(1.0, 3).unwrap();
        let f = face_diffusion(&[0.3, 5.0, 1.0], |_, _, _| 2.0, &g, 0.0, 0.05).unwrap();
        assert_eq!(f.values(), &[2.0, 2.0]);

        let g = Grid1D::new(1.0, 3).unwrap();
        let f = face_diffusion(&[0.0, 2.0, 2.0], |_, _, z| 1.0 + z, &g, 0.0, 0.05).unwrap();
        assert_eq!(f.values()[0], 2.0);

        let f = face_diffusion(&[1.0, 3.0, 3.0], |_, _, z| z * z, &g, 0.0, 0.05).unwrap();
        assert_eq!(f.values()[0], 4.0);

        let err = face_diffusion(&[0.0, 0.0, 0.0], |_, _, z| z * z, &g, 0.0, 0.05).unwrap_err();
        assert!(matches!(err, Error::ModelViolation { .. }));
    }

    #[test]
    fn stencil_by_hand() {
        let faces = FaceCoefficients::new(vec![1.0, 1.0], 0.0).unwrap();
        assert_eq!(apply_diffusion(&[0.0, 1.0, 4.0], &faces, 1.0), vec![1.0, 2.0, -3.0]);
        assert_eq!(apply_diffusion(&[7.0, 7.0, 7.0], &faces, 0.3), vec![0.0; 3]);
    }

    #[test]
    fn single_maximum_diffuses_down() {
        let faces = FaceCoefficients::new(vec![0.4; 5], 0.0).unwrap();
        let rate = apply_diffusion(&[0.0, 0.1, 0.9, 0.2, 0.1, 0.0], &faces, 0.1);
        assert!(rate[2] < 0.0);
    }

    #[test]
    fn boundary_flux_gating() {
        let p = ModelParameters::desk_default();
        let mut rate = vec![0.0; 4];
        apply_drug_boundary_flux(&mut rate, 0.0, 0.0, 1.0, 1.0, &p, 0.5).unwrap();
        assert_eq!(rate, vec![0.0; 4]);

        let below = p.gate_threshold - 1.0;
        apply_drug_boundary_flux(&mut rate, 3.0, 0.0, below, 1.0, &p, 0.5).unwrap();
        assert_eq!(rate[0], 0.0);

        let above = p.gate_threshold + p.gate_width;
        let gate = apply_drug_boundary_flux(&mut rate, 2.0, 0.0, above, 1.0, &p, 0.5).unwrap();
        assert_eq!(gate.left, 1.0);
        assert_eq!(rate, vec![4.0, 0.0, 0.0, 0.0]);

        assert!(matches!(
            apply_drug_boundary_flux(&mut rate, -0.1, 0.0, 1.0, 1.0, &p, 0.5),
            Err(Error::Admissibility(_))
        ));
    }

    #[test]
    fn implicit_solve_inverts_operator() {
        let faces = FaceCoefficients::new(vec![0.3, 1.2, 0.7, 0.5], 0.0).unwrap();
        let x = [0.2, 1.0, 0.1, 3.0, 0.4];
        let (h, dt) = (0.25, 0.05);
        let dx = apply_diffusion(&x, &faces, h);
        let rhs: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a - dt * b).collect();
        let solved = solve_implicit_diffusion(&rhs, &faces, h, dt).unwrap();
        for (a, b) in solved.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
