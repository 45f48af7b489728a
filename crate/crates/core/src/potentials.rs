//! Bounded radial potentials with the spectral metadata the existence theory
//! needs: `V̲ = essinf V` and the bottom of the essential spectrum `λ_ess`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::scalar::Real;

/// Tail variation (relative to `max(1, sup|V|)`) below which a tabulated
/// potential is considered to have reached its limit.
pub const TAIL_TOLERANCE: f64 = 1e-6;

/// Shape of a radial potential, without shift or overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `-depth · exp(-r² / (2 width²))`.
    GaussianWell { depth: f64, width: f64 },
    /// `-depth` for `r < radius`, zero outside.
    SquareWell { depth: f64, radius: f64 },
    Constant { value: f64 },
    /// Samples `(r_i, V_i)`: linear interpolation inside, constant outside.
    Tabulated { r: Vec<f64>, v: Vec<f64> },
    Sum { terms: Vec<PotentialKind> },
}

impl PotentialKind {
    fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be finite")))
            }
        };
        match self {
            PotentialKind::GaussianWell { depth, width } => {
                finite(*depth, "well depth")?;
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(Error::InvalidParameter(format!("well width {width} must be positive")));
                }
            }
            PotentialKind::SquareWell { depth, radius } => {
                finite(*depth, "well depth")?;
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidParameter(format!("well radius {radius} must be positive")));
                }
            }
            PotentialKind::Constant { value } => finite(*value, "constant")?,
            PotentialKind::Tabulated { r, v } => {
                if r.is_empty() || r.len() != v.len() {
                    return Err(Error::InvalidParameter(
                        "tabulated potential needs equally many radii and values".into(),
                    ));
                }
                if let Some(&bad) = r.iter().find(|&&x| x < 0.0) {
                    return Err(Error::NegativeRadius(bad));
                }
                if r.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter("tabulated radii must increase strictly".into()));
                }
                if r.iter().chain(v).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("tabulated potential has non-finite entries".into()));
                }
            }
            PotentialKind::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidParameter("empty potential sum".into()));
                }
                for t in terms {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }

    fn value(&self, r: f64) -> f64 {
        match self {
            PotentialKind::GaussianWell { depth, width } => -depth * (-r * r / (2.0 * width * width)).exp(),
            PotentialKind::SquareWell { depth, radius } => {
                if r < *radius {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialKind::Constant { value } => *value,
            PotentialKind::Tabulated { r: rs, v } => {
                let n = rs.len();
                if r <= rs[0] {
                    return v[0];
                }
                if r >= rs[n - 1] {
                    return v[n - 1];
                }
                let i = rs.partition_point(|&x| x <= r);
                let t = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
                v[i - 1] + t * (v[i] - v[i - 1])
            }
            PotentialKind::Sum { terms } => terms.iter().map(|t| t.value(r)).sum(),
        }
    }

    fn sup_abs(&self) -> f64 {
        match self {
            PotentialKind::GaussianWell { depth, .. } | PotentialKind::SquareWell { depth, .. } => depth.abs(),
            PotentialKind::Constant { value } => value.abs(),
            PotentialKind::Tabulated { v, .. } => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            PotentialKind::Sum { terms } => terms.iter().map(|t| t.sup_abs()).sum(),
        }
    }

    /// Radius beyond which the potential is constant up to `1e-16` relative.
    fn reach(&self) -> f64 {
        match self {
            PotentialKind::GaussianWell { width, .. } => 9.0 * width,
            PotentialKind::SquareWell { radius, .. } => *radius,
            PotentialKind::Constant { .. } => 0.0,
            PotentialKind::Tabulated { r, .. } => *r.last().unwrap_or(&0.0),
            PotentialKind::Sum { terms } => terms.iter().map(|t| t.reach()).fold(0.0, f64::max),
        }
    }

    fn ess_inf(&self) -> f64 {
        match self {
            PotentialKind::GaussianWell { depth, .. } | PotentialKind::SquareWell { depth, .. } => {
                (-depth).min(0.0)
            }
            PotentialKind::Constant { value } => *value,
            PotentialKind::Tabulated { v, .. } => v.iter().cloned().fold(f64::INFINITY, f64::min),
            PotentialKind::Sum { .. } => {
                // Dense scan, then golden-section polish of the best bracket.
                let reach = self.reach().max(1.0);
                let n = 20_000;
                let h = reach / n as f64;
                let (mut best_i, mut best) = (0usize, f64::INFINITY);
                for i in 0..=n {
                    let v = self.value(i as f64 * h);
                    if v < best {
                        best = v;
                        best_i = i;
                    }
                }
                let (mut a, mut b) = ((best_i as f64 - 1.0).max(0.0) * h, (best_i as f64 + 1.0) * h);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let c = b - g * (b - a);
                    let d = a + g * (b - a);
                    if self.value(c) < self.value(d) {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                let polished = self.value(0.5 * (a + b));
                // Tail value for r beyond the scan.
                best.min(polished).min(self.value(reach * 2.0))
            }
        }
    }

    fn floor(&self) -> Result<f64> {
        match self {
            PotentialKind::GaussianWell { .. } | PotentialKind::SquareWell { .. } => Ok(0.0),
            PotentialKind::Constant { value } => Ok(*value),
            PotentialKind::Tabulated { r, v } => {
                let n = r.len();
                let tol = TAIL_TOLERANCE * self.sup_abs().max(1.0);
                if n < 2 {
                    return Ok(v[0]);
                }
                // Variation over the last tenth of the tabulated range.
                let cut = r[n - 1] - 0.1 * (r[n - 1] - r[0]);
                let tail = r.iter().zip(v).filter(|(&ri, _)| ri >= cut).map(|(_, &vi)| vi);
                let (lo, hi) = tail.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                if hi - lo > tol {
                    return Err(Error::NoLimitDetected {
                        oscillation: hi - lo,
                        tolerance: tol,
                    });
                }
                Ok(v[n - 1])
            }
            PotentialKind::Sum { terms } => terms.iter().map(|t| t.floor()).sum(),
        }
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::GaussianWell { depth, width } => write!(f, "gaussian_well({depth},{width})"),
            PotentialKind::SquareWell { depth, radius } => write!(f, "square_well({depth},{radius})"),
            PotentialKind::Constant { value } => write!(f, "constant({value})"),
            PotentialKind::Tabulated { r, .. } => write!(f, "tabulated({} samples)", r.len()),
            PotentialKind::Sum { terms } => {
                write!(f, "sum(")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A radial potential `V(r) = shape(r) + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    #[serde(default)]
    pub offset: f64,
    /// Manually supplied bottom of the essential spectrum (before `offset`),
    /// for potentials without a detectable limit at infinity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_override: Option<f64>,
}

impl Potential {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            offset: 0.0,
            floor_override: None,
        })
    }

    pub fn gaussian_well(depth: f64, width: f64) -> Result<Self> {
        Self::new(PotentialKind::GaussianWell { depth, width })
    }

    pub fn square_well(depth: f64, radius: f64) -> Result<Self> {
        Self::new(PotentialKind::SquareWell { depth, radius })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(PotentialKind::Constant { value })
    }

    pub fn tabulated(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Self::new(PotentialKind::Tabulated { r, v })
    }

    pub fn sum(terms: Vec<PotentialKind>) -> Result<Self> {
        Self::new(PotentialKind::Sum { terms })
    }

    /// Reads a two-column `r,V` CSV; `#` comments and a non-numeric header
    /// line are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (mut r, mut v) = (Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(|c| c == ',' || c == ';' || c == '\t' || c == ' ').filter(|c| !c.is_empty());
            let (a, b) = (cols.next(), cols.next());
            let parsed = a.zip(b).and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)));
            match parsed {
                Some((x, y)) => {
                    r.push(x);
                    v.push(y);
                }
                None if r.is_empty() => continue,
                None => return Err(Error::Parse(format!("potential CSV line {}: '{line}'", lineno + 1))),
            }
        }
        Self::tabulated(r, v)
    }

    pub fn with_floor_override(mut self, floor: f64) -> Self {
        self.floor_override = Some(floor - self.offset);
        self
    }

    /// `V + d`. Both `V̲` and `λ_ess` move by `d`.
    pub fn shift(&self, d: f64) -> Self {
        let mut out = self.clone();
        match &mut out.kind {
            PotentialKind::Constant { value } if self.offset == 0.0 => *value += d,
            _ => out.offset += d,
        }
        out
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        Ok(self.kind.value(r) + self.offset)
    }

    /// Values at the grid nodes (at `|x|` on two-sided grids).
    pub fn sample<T: Real>(&self, grid: &RadialGrid<T>) -> Vec<T> {
        grid.nodes()
            .iter()
            .map(|&r| T::lit(self.kind.value(r.as_f64().abs()) + self.offset))
            .collect()
    }

    /// `V̲ = essinf V`.
    pub fn ess_inf(&self) -> f64 {
        self.kind.ess_inf() + self.offset
    }

    pub fn sup_abs(&self) -> f64 {
        self.kind.sup_abs() + self.offset.abs()
    }

    pub fn has_limit_at_infinity(&self) -> bool {
        self.kind.floor().is_ok()
    }

    /// `λ_ess(V)`, taken as `lim_{r→∞} V(r)` unless overridden.
    pub fn essential_spectrum_floor(&self) -> Result<f64> {
        match self.floor_override {
            Some(f) => Ok(f + self.offset),
            None => Ok(self.kind.floor()? + self.offset),
        }
    }

    /// `V̲ - λ_ess`; must be `<= 0` for the mass threshold to exist.
    pub fn gap(&self) -> Result<f64> {
        Ok(self.kind.ess_inf() - self.floor_override.map_or_else(|| self.kind.floor(), Ok)?)
    }

    /// Identifier stored in solution records.
    pub fn id(&self) -> String {
        let mut s = self.kind.to_string();
        if self.offset != 0.0 {
            s.push_str(&format!("{:+}", self.offset));
        }
        if let Some(f) = self.floor_override {
            s.push_str(&format!("[floor={f}]"));
        }
        s
    }
}
