//! Node-centred uniform grids on intervals and rectangles with homogeneous
//! Neumann boundaries, and the discrete operators used by the time stepper.
//!
//! Boundary nodes sit on ∂Ω and own half a cell (a quarter at corners).
//! Every operator here is written in flux form with zero flux through the
//! boundary faces, so trapezoid-weighted sums telescope to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical domain. Also serves as the geometry of a Laplacian spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::ParamDomain {
                    name,
                    value: v,
                    reason: "domain extent must be finite and positive",
                })
            }
        };
        match *self {
            Domain::Interval { length } => check("length", length),
            Domain::Rectangle { lx, ly } => {
                check("lx", lx)?;
                check("ly", ly)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
}

impl Grid {
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::new(Domain::Interval { length }, n, 1)
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(Domain::Rectangle { lx, ly }, nx, ny)
    }

    /// `ny` is ignored for intervals.
    pub fn new(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        domain.validate()?;
        let too_coarse = |n: usize| Error::Domain(format!("grid needs at least 3 nodes per axis, got {n}"));
        if nx < 3 {
            return Err(too_coarse(nx));
        }
        match domain {
            Domain::Interval { length } => Ok(Self {
                domain,
                nx,
                ny: 1,
                dx: length / (nx - 1) as f64,
                dy: 1.0,
            }),
            Domain::Rectangle { lx, ly } => {
                if ny < 3 {
                    return Err(too_coarse(ny));
                }
                Ok(Self {
                    domain,
                    nx,
                    ny,
                    dx: lx / (nx - 1) as f64,
                    dy: ly / (ny - 1) as f64,
                })
            }
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    /// Equal to 1 on intervals.
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn min_spacing(&self) -> f64 {
        if self.dim() == 1 {
            self.dx
        } else {
            self.dx.min(self.dy)
        }
    }

    /// Row-major, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }
    pub fn y(&self, j: usize) -> f64 {
        if self.dim() == 1 {
            0.0
        } else {
            j as f64 * self.dy
        }
    }

    /// Coordinates of every node in storage order.
    pub fn coordinates(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (self.x(i), self.y(j))))
    }

    /// Trapezoid quadrature weight of a node (includes the cell volume).
    pub fn quadrature_weight(&self, i: usize, j: usize) -> f64 {
        let wx = axis_weight(i, self.nx) * self.dx;
        if self.dim() == 1 {
            wx
        } else {
            wx * axis_weight(j, self.ny) * self.dy
        }
    }

    /// Dimensionless trapezoid factor (1, 1/2 or 1/4) of every node.
    pub(crate) fn half_cell_factors(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            let wy = if self.dim() == 1 { 1.0 } else { axis_weight(j, self.ny) };
            for i in 0..self.nx {
                w.push(axis_weight(i, self.nx) * wy);
            }
        }
        w
    }

    pub fn check_shape(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.coordinates().map(|(x, y)| f(x, y)).collect()
    }
}

#[inline]
fn axis_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// The three unknowns on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub h: Vec<f64>,
}

impl FieldSet {
    pub fn uniform(grid: &Grid, c1: f64, c2: f64, h: f64) -> Self {
        let n = grid.len();
        Self {
            c1: vec![c1; n],
            c2: vec![c2; n],
            h: vec![h; n],
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        grid.check_shape(&self.c1)?;
        grid.check_shape(&self.c2)?;
        grid.check_shape(&self.h)
    }

    /// Name of the first field holding a non-finite value.
    pub fn first_nonfinite(&self) -> Option<&'static str> {
        [("c1", &self.c1), ("c2", &self.c2), ("h", &self.h)]
            .into_iter()
            .find(|(_, v)| v.iter().any(|x| !x.is_finite()))
            .map(|(name, _)| name)
    }
}

/// Visits every interior face along one axis as `(left_node, right_node, spacing)`.
fn for_each_face(grid: &Grid, axis: usize, mut f: impl FnMut(usize, usize, f64)) {
    let (nx, ny) = (grid.nx, grid.ny);
    match axis {
        0 => {
            for j in 0..ny {
                for i in 0..nx - 1 {
                    f(grid.index(i, j), grid.index(i + 1, j), grid.dx);
                }
            }
        }
        _ => {
            for j in 0..ny - 1 {
                for i in 0..nx {
                    f(grid.index(i, j), grid.index(i, j + 1), grid.dy);
                }
            }
        }
    }
}

/// Accumulates `−(F_right − F_left)/d` into `out`, given the flux of each
/// interior face; boundary nodes divide by the half cell `d/2`.
fn accumulate_flux_divergence(grid: &Grid, axis: usize, flux: impl Fn(usize, usize, f64) -> f64, out: &mut [f64]) {
    let n_axis = if axis == 0 { grid.nx } else { grid.ny };
    let cell_factor = |node: usize| {
        let pos = if axis == 0 { node % grid.nx } else { node / grid.nx };
        if pos == 0 || pos + 1 == n_axis {
            2.0
        } else {
            1.0
        }
    };
    for_each_face(grid, axis, |l, r, d| {
        let f = flux(l, r, d);
        out[l] -= cell_factor(l) * f / d;
        out[r] += cell_factor(r) * f / d;
    });
}

/// Second-order Neumann Laplacian with ghost reflection at the boundary.
pub fn laplacian_neumann(grid: &Grid, u: &[f64]) -> Result<Vec<f64>> {
    grid.check_shape(u)?;
    let mut out = vec![0.0; u.len()];
    for axis in 0..grid.dim() {
        // diffusive flux −∂u, so −div(flux) = Δu
        accumulate_flux_divergence(grid, axis, |l, r, d| -(u[r] - u[l]) / d, &mut out);
    }
    Ok(out)
}

/// Face taxis velocity `b (h_r − h_l)/d`.
#[inline]
pub fn face_velocity(b: f64, h_left: f64, h_right: f64, spacing: f64) -> f64 {
    b * (h_right - h_left) / spacing
}

/// `−∇·(b c1 ∇h)` with first-order upwinding of `c1` by face-velocity sign.
pub fn taxis_divergence_upwind(grid: &Grid, c1: &[f64], h: &[f64], b: f64) -> Result<Vec<f64>> {
    grid.check_shape(c1)?;
    grid.check_shape(h)?;
    let mut out = vec![0.0; c1.len()];
    if b == 0.0 {
        return Ok(out);
    }
    for axis in 0..grid.dim() {
        accumulate_flux_divergence(
            grid,
            axis,
            |l, r, d| {
                let v = face_velocity(b, h[l], h[r], d);
                // zero-velocity faces take the left state
                let upwind = if v >= 0.0 { c1[l] } else { c1[r] };
                v * upwind
            },
            &mut out,
        );
    }
    Ok(out)
}

/// Largest `|b ∂h|` over all interior faces.
pub fn max_face_speed(grid: &Grid, h: &[f64], b: f64) -> f64 {
    let mut vmax = 0.0f64;
    for axis in 0..grid.dim() {
        for_each_face(grid, axis, |l, r, d| {
            vmax = vmax.max(face_velocity(b, h[l], h[r], d).abs());
        });
    }
    vmax
}

/// Trapezoid-rule approximation of `∫_Ω u`.
pub fn total_mass(grid: &Grid, u: &[f64]) -> Result<f64> {
    grid.check_shape(u)?;
    let mut sum = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            sum += grid.quadrature_weight(i, j) * u[grid.index(i, j)];
        }
    }
    Ok(sum)
}
