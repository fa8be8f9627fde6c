//! Reaction kinetics of the normal / tumor / immune / drug system.
//!
//! The four rates, with `z = (N, T, I, U)`:
//!
//! ```text
//! F_N = r1 N (1 - b1 N) - c4 T N - a3 (1 - e^-U) N
//! F_T = r2 T (1 - b2 T) - c2 I T - c3 T N - a2 (1 - e^-U) T
//! F_I = r3 I (1 - b3 I) + s + rho I T / (alpha + T) - c1 I T - k1 I - a1 (1 - e^-U) I
//! F_U = -k2 U
//! ```
//!
//! The growth rates `r_i`, the immune source `s` and the drug consumption
//! rate `k2` may vary in space and time through [`Coefficient`]; every other
//! coefficient is a positive constant.

use crate::error::{check_finite, param, Error, Result};

/// Index of a species in a [`StateVector`] or a rate quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Normal = 0,
    Tumor = 1,
    Immune = 2,
    Drug = 3,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::Normal, Species::Tumor, Species::Immune, Species::Drug];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Species::Normal => "N",
            Species::Tumor => "T",
            Species::Immune => "I",
            Species::Drug => "U",
        }
    }
}

/// Four per-cell quantities, one per species.
pub type Quad = [f64; 4];

/// Cell-centered concentrations of the four species.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    fields: [Vec<f64>; 4],
}

impl StateVector {
    /// Builds a state and checks that every entry is finite and non-negative.
    pub fn new(normal: Vec<f64>, tumor: Vec<f64>, immune: Vec<f64>, drug: Vec<f64>) -> Result<Self> {
        let state = Self {
            fields: [normal, tumor, immune, drug],
        };
        state.validate()?;
        Ok(state)
    }

    /// Spatially uniform state on `cells` cells.
    pub fn uniform(cells: usize, values: Quad) -> Result<Self> {
        Self::new(
            vec![values[0]; cells],
            vec![values[1]; cells],
            vec![values[2]; cells],
            vec![values[3]; cells],
        )
    }

    pub(crate) fn from_fields_unchecked(fields: [Vec<f64>; 4]) -> Self {
        Self { fields }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.fields[0].len();
        for species in Species::ALL {
            let field = &self.fields[species.index()];
            if field.len() != n {
                return Err(Error::Dimension(format!(
                    "species {} has {} cells, expected {}",
                    species.label(),
                    field.len(),
                    n
                )));
            }
            for &value in field {
                let value = check_finite(species.label(), value)?;
                if value < 0.0 {
                    return Err(Error::ModelViolation {
                        name: species.label(),
                        value,
                        reason: "concentrations must be non-negative",
                    });
                }
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.fields[0].len()
    }

    pub fn field(&self, species: Species) -> &[f64] {
        &self.fields[species.index()]
    }

    pub fn field_mut(&mut self, species: Species) -> &mut Vec<f64> {
        &mut self.fields[species.index()]
    }

    pub fn fields(&self) -> &[Vec<f64>; 4] {
        &self.fields
    }

    pub fn into_fields(self) -> [Vec<f64>; 4] {
        self.fields
    }

    /// Values of all four species in one cell.
    pub fn at(&self, cell: usize) -> Quad {
        [
            self.fields[0][cell],
            self.fields[1][cell],
            self.fields[2][cell],
            self.fields[3][cell],
        ]
    }
}

/// How a [`Schedule`] fills the gaps between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    /// Holds the value of the most recent knot.
    Constant,
}

/// A knot-based function of time, optionally varying per cell.
///
/// Each knot carries either one value (uniform in space) or one value per
/// grid cell. Evaluation outside the knot range clamps to the end values;
/// a periodic schedule first reduces time modulo its period.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    interpolation: Interpolation,
    period: Option<f64>,
}

impl Schedule {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, interpolation: Interpolation) -> Result<Self> {
        if times.is_empty() {
            return Err(param("schedule", "at least one knot is required"));
        }
        if times.len() != values.len() {
            return Err(param(
                "schedule",
                format!("{} knot times but {} knot values", times.len(), values.len()),
            ));
        }
        for &t in &times {
            check_finite("schedule.times", t)?;
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param("schedule", "knot times must be strictly increasing"));
        }
        let width = values[0].len();
        if width == 0 {
            return Err(param("schedule", "knot values must not be empty"));
        }
        for knot in &values {
            if knot.len() != width {
                return Err(param("schedule", "every knot must carry the same number of values"));
            }
            for &v in knot {
                check_finite("schedule.values", v)?;
            }
        }
        Ok(Self {
            times,
            values,
            interpolation,
            period: None,
        })
    }

    /// Spatially uniform schedule.
    pub fn uniform(times: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        Self::new(times, values.into_iter().map(|v| vec![v]).collect(), interpolation)
    }

    /// Repeat the schedule with the given period; time is reduced to `[0, period)`.
    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(param("schedule.period", "period must be positive"));
        }
        self.period = Some(period);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    /// Number of values per knot: 1 for uniform schedules, else the cell count.
    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn eval(&self, cell: usize, t: f64) -> f64 {
        let column = if self.width() == 1 { 0 } else { cell };
        let t = match self.period {
            Some(p) => t.rem_euclid(p),
            None => t,
        };
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.values[0][column];
        }
        if t >= self.times[last] {
            return self.values[last][column];
        }
        // first knot strictly after t
        let hi = self.times.partition_point(|&knot| knot <= t);
        let lo = hi - 1;
        match self.interpolation {
            Interpolation::Constant => self.values[lo][column],
            Interpolation::Linear => {
                let (t0, t1) = (self.times[lo], self.times[hi]);
                let (v0, v1) = (self.values[lo][column], self.values[hi][column]);
                let w = (t - t0) / (t1 - t0);
                v0 + w * (v1 - v0)
            }
        }
    }

    fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }
}

/// A coefficient that is either constant or follows a [`Schedule`].
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    Scheduled(Schedule),
}

impl Coefficient {
    pub fn eval(&self, cell: usize, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Scheduled(s) => s.eval(cell, t),
        }
    }

    /// Smallest and largest values the coefficient can take.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Coefficient::Constant(c) => (*c, *c),
            Coefficient::Scheduled(s) => s
                .all_values()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v))),
        }
    }

    fn width(&self) -> usize {
        match self {
            Coefficient::Constant(_) => 1,
            Coefficient::Scheduled(s) => s.width(),
        }
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

/// Diffusion coefficient of one species as a function of its own concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusivity {
    Constant(f64),
    /// `base + slope * z`
    Affine { base: f64, slope: f64 },
}

impl Diffusivity {
    pub fn eval(&self, _x: f64, _t: f64, z: f64) -> f64 {
        match *self {
            Diffusivity::Constant(d) => d,
            Diffusivity::Affine { base, slope } => base + slope * z,
        }
    }

    /// Largest value over concentrations in `[0, z_max]`.
    pub fn max_over(&self, z_max: f64) -> f64 {
        match *self {
            Diffusivity::Constant(d) => d,
            Diffusivity::Affine { base, slope } => base.max(base + slope * z_max),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Diffusivity::Constant(_)) || matches!(self, Diffusivity::Affine { slope, .. } if *slope == 0.0)
    }
}

/// Declared bounds `0 < min <= r_i <= max` on the growth rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBounds {
    pub min: f64,
    pub max: f64,
}

/// Every coefficient of the kinetics and boundary conditions.
///
/// Construct through [`ModelParameters::desk_default`] and adjust fields,
/// then call [`ModelParameters::validate`] before use.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    /// Logistic growth rates `r1, r2, r3` of normal, tumor and immune cells.
    pub growth: [Coefficient; 3],
    pub growth_bounds: GrowthBounds,
    /// Inverse carrying capacities `b1, b2, b3`.
    pub inverse_capacity: [f64; 3],
    /// `c1`: loss of immune cells per tumor encounter.
    pub immune_loss_to_tumor: f64,
    /// `c2`: tumor kill by immune cells.
    pub tumor_kill_by_immune: f64,
    /// `c3`: tumor loss from competition with normal cells.
    pub tumor_loss_to_normal: f64,
    /// `c4`: normal loss from competition with tumor cells.
    pub normal_loss_to_tumor: f64,
    /// `a1`: drug kill amplitude on immune cells.
    pub drug_kill_immune: f64,
    /// `a2`: drug kill amplitude on tumor cells.
    pub drug_kill_tumor: f64,
    /// `a3`: drug kill amplitude on normal cells.
    pub drug_kill_normal: f64,
    /// `k1`
    pub immune_death: f64,
    /// `k2`, bounded below by `drug_consumption_floor`.
    pub drug_consumption: Coefficient,
    /// `k0`
    pub drug_consumption_floor: f64,
    /// `alpha`
    pub immune_half_saturation: f64,
    /// `rho`
    pub immune_recruitment: f64,
    /// `s`
    pub immune_source: Coefficient,
    /// Width `delta` of the smoothed Heaviside gate.
    pub gate_width: f64,
    /// Normal-cell level below which boundary injection shuts off.
    pub gate_threshold: f64,
    pub diffusion: [Diffusivity; 4],
    /// Lower bound `delta0` on every diffusion coefficient.
    pub diffusion_floor: f64,
}

impl ModelParameters {
    /// Desk test values: unit rates, capacities and interactions, `k1 = 0.2`,
    /// `k2 = 1`, `alpha = 1`, `rho = 0.5`, `s = 0.1`, `delta = delta0 = 0.05`,
    /// gate threshold 0.2 and diffusion 0.1 for every species.
    ///
    /// These are illustrative values, not calibrated clinical data.
    pub fn desk_default() -> Self {
        Self {
            growth: [1.0.into(), 1.0.into(), 1.0.into()],
            growth_bounds: GrowthBounds { min: 1e-6, max: 1e3 },
            inverse_capacity: [1.0; 3],
            immune_loss_to_tumor: 1.0,
            tumor_kill_by_immune: 1.0,
            tumor_loss_to_normal: 1.0,
            normal_loss_to_tumor: 1.0,
            drug_kill_immune: 1.0,
            drug_kill_tumor: 1.0,
            drug_kill_normal: 1.0,
            immune_death: 0.2,
            drug_consumption: 1.0.into(),
            drug_consumption_floor: 1e-3,
            immune_half_saturation: 1.0,
            immune_recruitment: 0.5,
            immune_source: 0.1.into(),
            gate_width: 0.05,
            gate_threshold: 0.2,
            diffusion: [Diffusivity::Constant(0.1); 4],
            diffusion_floor: 0.05,
        }
    }

    /// Checks every static invariant. `cells` is the grid size that per-cell
    /// schedules must match, when known.
    pub fn validate(&self, cells: Option<usize>) -> Result<()> {
        fn positive(name: &str, value: f64) -> Result<()> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(param(name, format!("must be positive, got {value}")))
            }
        }

        let GrowthBounds { min, max } = self.growth_bounds;
        positive("r_min", min)?;
        if !(max.is_finite() && max >= min) {
            return Err(param("r_max", "growth bounds need 0 < r_min <= r_max"));
        }
        for (k, r) in self.growth.iter().enumerate() {
            let name = format!("r{}", k + 1);
            let (lo, hi) = r.range();
            if lo < min || hi > max {
                return Err(param(
                    name,
                    format!("growth rate range [{lo}, {hi}] outside declared bounds [{min}, {max}]"),
                ));
            }
        }
        for (k, &b) in self.inverse_capacity.iter().enumerate() {
            let name = format!("b{}", k + 1);
            if !(b.is_finite() && b > 0.0) {
                return Err(param(name, format!("inverse carrying capacities positive, got {b}")));
            }
        }
        positive("c1", self.immune_loss_to_tumor)?;
        positive("c2", self.tumor_kill_by_immune)?;
        positive("c3", self.tumor_loss_to_normal)?;
        positive("c4", self.normal_loss_to_tumor)?;
        positive("a1", self.drug_kill_immune)?;
        positive("a2", self.drug_kill_tumor)?;
        positive("a3", self.drug_kill_normal)?;
        positive("k1", self.immune_death)?;
        positive("alpha", self.immune_half_saturation)?;
        positive("rho", self.immune_recruitment)?;
        positive("k0", self.drug_consumption_floor)?;
        let (k2_lo, _) = self.drug_consumption.range();
        if !(k2_lo >= self.drug_consumption_floor) {
            return Err(param(
                "k2",
                format!("k2 >= k0 violated: min k2 {k2_lo} < k0 {}", self.drug_consumption_floor),
            ));
        }
        let (s_lo, _) = self.immune_source.range();
        if !(s_lo >= 0.0) {
            return Err(param("s", format!("immune source must be non-negative, got {s_lo}")));
        }
        positive("delta", self.gate_width)?;
        let cap = 1.0 / self.inverse_capacity[0];
        if !(self.gate_threshold > 0.0 && self.gate_threshold < cap) {
            return Err(param(
                "a0_gate",
                format!("0 < a0_gate < 1/b1 violated: a0_gate = {}, 1/b1 = {cap}", self.gate_threshold),
            ));
        }
        positive("delta0", self.diffusion_floor)?;
        for (k, d) in self.diffusion.iter().enumerate() {
            let name = format!("d{}", k + 1);
            let ok = match *d {
                Diffusivity::Constant(v) => v.is_finite() && v >= self.diffusion_floor,
                Diffusivity::Affine { base, slope } => {
                    base.is_finite() && slope.is_finite() && slope >= 0.0 && base >= self.diffusion_floor
                }
            };
            if !ok {
                return Err(param(
                    name,
                    format!("d >= delta0 = {} violated for {d:?}", self.diffusion_floor),
                ));
            }
        }
        if let Some(n) = cells {
            let coefficients = [
                ("r1", &self.growth[0]),
                ("r2", &self.growth[1]),
                ("r3", &self.growth[2]),
                ("k2", &self.drug_consumption),
                ("s", &self.immune_source),
            ];
            for (name, c) in coefficients {
                let w = c.width();
                if w != 1 && w != n {
                    return Err(param(name, format!("per-cell schedule has {w} values, grid has {n} cells")));
                }
            }
        }
        Ok(())
    }

    /// Carrying capacity `1/b_i` of normal, tumor or immune cells.
    pub fn capacity(&self, species: Species) -> Option<f64> {
        match species {
            Species::Drug => None,
            s => Some(1.0 / self.inverse_capacity[s.index()]),
        }
    }

    pub(crate) fn growth_at(&self, k: usize, cell: usize, t: f64) -> Result<f64> {
        const NAMES: [&str; 3] = ["r1", "r2", "r3"];
        let r = self.growth[k].eval(cell, t);
        let GrowthBounds { min, max } = self.growth_bounds;
        if !(r >= min && r <= max) {
            return Err(Error::ModelViolation {
                name: NAMES[k],
                value: r,
                reason: "growth rate outside [r_min, r_max]",
            });
        }
        Ok(r)
    }

    pub(crate) fn consumption_at(&self, cell: usize, t: f64) -> Result<f64> {
        let k2 = self.drug_consumption.eval(cell, t);
        if !(k2 >= self.drug_consumption_floor) {
            return Err(Error::ModelViolation {
                name: "k2",
                value: k2,
                reason: "drug consumption below k0",
            });
        }
        Ok(k2)
    }

    pub(crate) fn source_at(&self, cell: usize, t: f64) -> Result<f64> {
        let s = self.immune_source.eval(cell, t);
        if !(s >= 0.0) {
            return Err(Error::ModelViolation {
                name: "s",
                value: s,
                reason: "immune source must be non-negative",
            });
        }
        Ok(s)
    }
}

/// Where and when a rate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub cell: usize,
    pub x: f64,
    pub time: f64,
}

impl Site {
    pub fn new(cell: usize, x: f64, time: f64) -> Self {
        Self { cell, x, time }
    }
}

/// Scheduled coefficients resolved at one site.
struct Local {
    r: [f64; 3],
    k2: f64,
    s: f64,
}

fn resolve(z: Quad, params: &ModelParameters, site: Site) -> Result<Local> {
    for species in Species::ALL {
        check_finite(species.label(), z[species.index()])?;
    }
    Ok(Local {
        r: [
            params.growth_at(0, site.cell, site.time)?,
            params.growth_at(1, site.cell, site.time)?,
            params.growth_at(2, site.cell, site.time)?,
        ],
        k2: params.consumption_at(site.cell, site.time)?,
        s: params.source_at(site.cell, site.time)?,
    })
}

/// Reaction rates `(F_N, F_T, F_I, F_U)` at concentrations `z = (N, T, I, U)`.
pub fn eval_reactions(z: Quad, params: &ModelParameters, site: Site) -> Result<Quad> {
    let local = resolve(z, params, site)?;
    Ok(reactions_with(z, params, &local))
}

fn reactions_with(z: Quad, p: &ModelParameters, local: &Local) -> Quad {
    let [n, t, i, u] = z;
    let [b1, b2, b3] = p.inverse_capacity;
    let [r1, r2, r3] = local.r;
    let exposure = 1.0 - (-u).exp();

    let f_n = r1 * n * (1.0 - b1 * n) - p.normal_loss_to_tumor * t * n - p.drug_kill_normal * exposure * n;
    let f_t = r2 * t * (1.0 - b2 * t)
        - p.tumor_kill_by_immune * i * t
        - p.tumor_loss_to_normal * t * n
        - p.drug_kill_tumor * exposure * t;
    let f_i = r3 * i * (1.0 - b3 * i) + local.s + p.immune_recruitment * i * t / (p.immune_half_saturation + t)
        - p.immune_loss_to_tumor * i * t
        - p.immune_death * i
        - p.drug_kill_immune * exposure * i;
    let f_u = -local.k2 * u;
    [f_n, f_t, f_i, f_u]
}

/// Row-major Jacobian `J[row][col] = dF_row / dz_col`.
pub type Jacobian = [[f64; 4]; 4];

/// Analytic Jacobian of [`eval_reactions`]; `k2` is treated as independent of the state.
pub fn eval_reaction_jacobian(z: Quad, params: &ModelParameters, site: Site) -> Result<Jacobian> {
    let local = resolve(z, params, site)?;
    Ok(jacobian_with(z, params, &local))
}

fn jacobian_with(z: Quad, p: &ModelParameters, local: &Local) -> Jacobian {
    let [n, t, i, _u] = z;
    let [b1, b2, b3] = p.inverse_capacity;
    let [r1, r2, r3] = local.r;
    let survival = (-z[3]).exp();
    let exposure = 1.0 - survival;
    let alpha = p.immune_half_saturation;
    let rho = p.immune_recruitment;

    let row_n = [
        r1 * (1.0 - 2.0 * b1 * n) - p.normal_loss_to_tumor * t - p.drug_kill_normal * exposure,
        -p.normal_loss_to_tumor * n,
        0.0,
        -p.drug_kill_normal * survival * n,
    ];
    let row_t = [
        -p.tumor_loss_to_normal * t,
        r2 * (1.0 - 2.0 * b2 * t)
            - p.tumor_kill_by_immune * i
            - p.tumor_loss_to_normal * n
            - p.drug_kill_tumor * exposure,
        -p.tumor_kill_by_immune * t,
        -p.drug_kill_tumor * survival * t,
    ];
    let row_i = [
        0.0,
        rho * i * alpha / ((alpha + t) * (alpha + t)) - p.immune_loss_to_tumor * i,
        r3 * (1.0 - 2.0 * b3 * i) + rho * t / (alpha + t)
            - p.immune_loss_to_tumor * t
            - p.immune_death
            - p.drug_kill_immune * exposure,
        -p.drug_kill_immune * survival * i,
    ];
    let row_u = [0.0, 0.0, 0.0, -local.k2];
    [row_n, row_t, row_i, row_u]
}

fn check_width(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(param("delta", format!("gate width must be positive, got {delta}")))
    }
}

/// C¹ switch: 0 for `z <= 0`, 1 for `z >= delta`, cubic smoothstep between.
pub fn heaviside_smooth(z: f64, delta: f64) -> Result<f64> {
    check_width(delta)?;
    check_finite("z", z)?;
    Ok(smoothstep(z, delta))
}

/// Derivative of [`heaviside_smooth`] with respect to `z`.
pub fn heaviside_derivative(z: f64, delta: f64) -> Result<f64> {
    check_width(delta)?;
    check_finite("z", z)?;
    Ok(smoothstep_slope(z, delta))
}

pub(crate) fn smoothstep(z: f64, delta: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= delta {
        1.0
    } else {
        let s = z / delta;
        s * s * (3.0 - 2.0 * s)
    }
}

pub(crate) fn smoothstep_slope(z: f64, delta: f64) -> f64 {
    if z <= 0.0 || z >= delta {
        0.0
    } else {
        let s = z / delta;
        6.0 * s * (1.0 - s) / delta
    }
}

/// Divides every rate by `1 + eps * sum |F_j|`.
pub fn regularize_reactions(rates: Quad, eps: f64) -> Result<Quad> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(param("eps", format!("regularization must be >= 0, got {eps}")));
    }
    for (k, &f) in rates.iter().enumerate() {
        check_finite(Species::ALL[k].label(), f)?;
    }
    let scale = 1.0 + eps * rates.iter().map(|f| f.abs()).sum::<f64>();
    Ok(rates.map(|f| f / scale))
}
