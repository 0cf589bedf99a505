//! Truncated lattice fields, the discrete Laplacian and the discrete
//! Hamiltonian / norm functionals.
//!
//! A [`LatticeField`] lives on the box `{-K..K}^n` with mesh `mu`; every site
//! outside the box is treated as zero, so all stencils and bond sums include
//! the bonds that connect the box to its (zero) exterior.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BreatherError, Result};
use crate::grid::Shape;

/// Lattice dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn new(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            other => Err(BreatherError::InvalidDimension(other)),
        }
    }

    pub fn n(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    /// `mu^n`, the volume of one lattice cell.
    pub fn cell_volume(self, mesh: f64) -> f64 {
        mesh.powi(self.n() as i32)
    }
}

impl TryFrom<usize> for Dim {
    type Error = BreatherError;
    fn try_from(n: usize) -> Result<Self> {
        Dim::new(n)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.n()
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n())
    }
}

/// Checks `1/2 <= p < 2/n`.
pub fn validate_exponent(dim: Dim, p: f64) -> Result<()> {
    if p.is_finite() && p >= 0.5 && p < 2.0 / dim.n() as f64 {
        Ok(())
    } else {
        Err(BreatherError::InvalidExponent { p, dim: dim.n() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    /// Site-centred (Sievers-Takeno).
    #[serde(rename = "ST")]
    SieversTakeno,
    /// Bond/plaquette-centred (Page).
    #[serde(rename = "P")]
    Page,
    /// Hybrid, half-shifted along x only.
    #[serde(rename = "H_x")]
    HybridX,
    /// Hybrid, half-shifted along y only.
    #[serde(rename = "H_y")]
    HybridY,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModeLabel::SieversTakeno => "ST",
            ModeLabel::Page => "P",
            ModeLabel::HybridX => "H_x",
            ModeLabel::HybridY => "H_y",
        };
        f.write_str(s)
    }
}

impl FromStr for ModeLabel {
    type Err = BreatherError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ST" | "st" => Ok(ModeLabel::SieversTakeno),
            "P" | "p" => Ok(ModeLabel::Page),
            "H_x" | "Hx" | "h_x" | "hx" => Ok(ModeLabel::HybridX),
            "H_y" | "Hy" | "h_y" | "hy" => Ok(ModeLabel::HybridY),
            other => Err(BreatherError::InvalidMode(format!("unknown mode label {other:?}"))),
        }
    }
}

/// Which breather: the half-mesh offset of the centre along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeSpec {
    dim: Dim,
    half: [bool; 2],
}

impl ModeSpec {
    pub fn new(dim: Dim, label: ModeLabel) -> Result<Self> {
        let half = match (dim, label) {
            (_, ModeLabel::SieversTakeno) => [false, false],
            (Dim::One, ModeLabel::Page) => [true, false],
            (Dim::Two, ModeLabel::Page) => [true, true],
            (Dim::Two, ModeLabel::HybridX) => [true, false],
            (Dim::Two, ModeLabel::HybridY) => [false, true],
            (Dim::One, l) => {
                return Err(BreatherError::InvalidMode(format!("{l} is not a 1D mode")));
            }
        };
        Ok(Self { dim, half })
    }

    /// Builds a mode from offsets in units of the mesh; each must be 0 or 1/2.
    pub fn from_offsets(dim: Dim, offsets: &[f64]) -> Result<Self> {
        if offsets.len() != dim.n() {
            return Err(BreatherError::InvalidMode(format!(
                "expected {} offsets, got {}",
                dim.n(),
                offsets.len()
            )));
        }
        let mut half = [false; 2];
        for (h, &o) in half.iter_mut().zip(offsets) {
            *h = if o == 0.0 {
                false
            } else if o == 0.5 {
                true
            } else {
                return Err(BreatherError::InvalidMode(format!("offset {o} not in {{0, 1/2}}")));
            };
        }
        Ok(Self { dim, half })
    }

    /// All `2^n` modes of a dimension, in the order ST, P, H_x, H_y.
    pub fn all(dim: Dim) -> Vec<ModeSpec> {
        let labels: &[ModeLabel] = match dim {
            Dim::One => &[ModeLabel::SieversTakeno, ModeLabel::Page],
            Dim::Two => &[
                ModeLabel::SieversTakeno,
                ModeLabel::Page,
                ModeLabel::HybridX,
                ModeLabel::HybridY,
            ],
        };
        labels.iter().map(|&l| ModeSpec::new(dim, l).expect("valid mode")).collect()
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn label(&self) -> ModeLabel {
        match (self.dim, self.half) {
            (_, [false, false]) => ModeLabel::SieversTakeno,
            (Dim::One, _) => ModeLabel::Page,
            (Dim::Two, [true, true]) => ModeLabel::Page,
            (Dim::Two, [true, false]) => ModeLabel::HybridX,
            (Dim::Two, [false, true]) => ModeLabel::HybridY,
        }
    }

    pub fn is_half(&self, axis: usize) -> bool {
        axis < self.dim.n() && self.half[axis]
    }

    /// Offset per axis, in units of the mesh.
    pub fn offset(&self) -> [f64; 2] {
        let o = |h: bool| if h { 0.5 } else { 0.0 };
        [o(self.half[0]), if self.dim == Dim::Two { o(self.half[1]) } else { 0.0 }]
    }

    /// Index reflection about the mode centre along one axis:
    /// `i -> -i` for site-centred axes, `i -> -i-1` for half-shifted ones.
    pub fn reflect_index(&self, axis: usize, i: i64) -> i64 {
        if self.is_half(axis) {
            -i - 1
        } else {
            -i
        }
    }
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Real field on `{-K..K}^n` with mesh `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    dim: Dim,
    mesh: f64,
    radius: usize,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(dim: Dim, mesh: f64, radius: usize) -> Result<Self> {
        check_geometry(mesh, radius)?;
        let side = 2 * radius + 1;
        Ok(Self { dim, mesh, radius, values: vec![0.0; side.pow(dim.n() as u32)] })
    }

    pub fn from_values(dim: Dim, mesh: f64, radius: usize, values: Vec<f64>) -> Result<Self> {
        check_geometry(mesh, radius)?;
        let side = 2 * radius + 1;
        let expected = side.pow(dim.n() as u32);
        if values.len() != expected {
            return Err(BreatherError::InvalidArgument(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(BreatherError::NonFinite(format!("lattice value {v}")));
        }
        Ok(Self { dim, mesh, radius, values })
    }

    /// Fills the box from a function of the multi-index (`l[1]` is 0 in 1D).
    pub fn from_fn(
        dim: Dim,
        mesh: f64,
        radius: usize,
        mut f: impl FnMut([i64; 2]) -> f64,
    ) -> Result<Self> {
        let mut out = Self::zeros(dim, mesh, radius)?;
        for k in 0..out.values.len() {
            let l = out.multi_index(k);
            out.values[k] = f(l);
        }
        Ok(out)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn shape(&self) -> Shape {
        Shape::new(self.dim.n(), self.side(), self.side())
    }

    /// Multi-index of a flat position, lexicographic order.
    pub fn multi_index(&self, k: usize) -> [i64; 2] {
        let r = self.radius as i64;
        match self.dim {
            Dim::One => [k as i64 - r, 0],
            Dim::Two => {
                let side = self.side();
                [(k / side) as i64 - r, (k % side) as i64 - r]
            }
        }
    }

    pub fn flat_index(&self, l: [i64; 2]) -> Option<usize> {
        let r = self.radius as i64;
        let inside = |i: i64| (-r..=r).contains(&i);
        match self.dim {
            Dim::One => inside(l[0]).then(|| (l[0] + r) as usize),
            Dim::Two => (inside(l[0]) && inside(l[1]))
                .then(|| (l[0] + r) as usize * self.side() + (l[1] + r) as usize),
        }
    }

    /// Value at a multi-index; zero outside the box.
    pub fn get(&self, l: [i64; 2]) -> f64 {
        self.flat_index(l).map_or(0.0, |k| self.values[k])
    }

    pub fn set(&mut self, l: [i64; 2], v: f64) -> Result<()> {
        let k = self
            .flat_index(l)
            .ok_or_else(|| BreatherError::InvalidArgument(format!("index {l:?} outside box")))?;
        self.values[k] = v;
        Ok(())
    }

    /// Unit value at the origin.
    pub fn delta(dim: Dim, mesh: f64, radius: usize) -> Result<Self> {
        let mut f = Self::zeros(dim, mesh, radius)?;
        f.set([0, 0], 1.0)?;
        Ok(f)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        crate::grid::max_abs(&self.values)
    }

    /// Euclidean (unweighted) inner product.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(crate::grid::dot(&self.values, &other.values))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(BreatherError::DimensionMismatch {
                left: self.dim.n(),
                right: other.dim.n(),
            });
        }
        if self.radius != other.radius || self.mesh != other.mesh {
            return Err(BreatherError::InvalidArgument(format!(
                "incompatible boxes: (mu={}, K={}) vs (mu={}, K={})",
                self.mesh, self.radius, other.mesh, other.radius
            )));
        }
        Ok(())
    }

    /// Copy with the outermost ring of sites set to zero.
    pub fn with_zero_boundary(&self) -> Self {
        let r = self.radius as i64;
        let mut out = self.clone();
        for k in 0..out.values.len() {
            let l = out.multi_index(k);
            let on_ring = l[0].abs() == r || (self.dim == Dim::Two && l[1].abs() == r);
            if on_ring {
                out.values[k] = 0.0;
            }
        }
        out
    }

    /// Writes the CSV interchange form: a `# dim=.. mu=.. radius=..` header,
    /// then `i[,j],value` rows in lexicographic order with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# dim={} mu={:.16e} radius={}", self.dim.n(), self.mesh, self.radius)?;
        for (k, v) in self.values.iter().enumerate() {
            let l = self.multi_index(k);
            match self.dim {
                Dim::One => writeln!(w, "{},{:.16e}", l[0], v)?,
                Dim::Two => writeln!(w, "{},{},{:.16e}", l[0], l[1], v)?,
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| BreatherError::Parse("empty lattice CSV".into()))??;
        let (dim, mesh, radius) = parse_header(&header)?;
        let mut field = Self::zeros(dim, mesh, radius)?;
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != dim.n() + 1 {
                return Err(BreatherError::Parse(format!("bad row {line:?}")));
            }
            let parse_i = |s: &str| {
                s.trim().parse::<i64>().map_err(|e| BreatherError::Parse(format!("{s:?}: {e}")))
            };
            let i = parse_i(cols[0])?;
            let j = if dim == Dim::Two { parse_i(cols[1])? } else { 0 };
            let v: f64 = cols[dim.n()]
                .trim()
                .parse()
                .map_err(|e| BreatherError::Parse(format!("{:?}: {e}", cols[dim.n()])))?;
            field.set([i, j], v)?;
            seen += 1;
        }
        if seen != field.len() {
            return Err(BreatherError::Parse(format!(
                "expected {} rows, found {seen}",
                field.len()
            )));
        }
        Ok(field)
    }
}

fn check_geometry(mesh: f64, radius: usize) -> Result<()> {
    if !(mesh.is_finite() && mesh > 0.0) {
        return Err(BreatherError::InvalidMesh(mesh));
    }
    if radius < 2 {
        return Err(BreatherError::InvalidRadius(radius));
    }
    Ok(())
}

fn parse_header(header: &str) -> Result<(Dim, f64, usize)> {
    let body = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| BreatherError::Parse(format!("missing header: {header:?}")))?;
    let (mut dim, mut mesh, mut radius) = (None, None, None);
    for tok in body.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| BreatherError::Parse(format!("bad header token {tok:?}")))?;
        let bad = |e: &dyn fmt::Display| BreatherError::Parse(format!("{key}={val}: {e}"));
        match key {
            "dim" => dim = Some(Dim::new(val.parse::<usize>().map_err(|e| bad(&e))?)?),
            "mu" => mesh = Some(val.parse::<f64>().map_err(|e| bad(&e))?),
            "radius" => radius = Some(val.parse::<usize>().map_err(|e| bad(&e))?),
            _ => return Err(BreatherError::Parse(format!("unknown header key {key:?}"))),
        }
    }
    match (dim, mesh, radius) {
        (Some(d), Some(m), Some(r)) => Ok((d, m, r)),
        _ => Err(BreatherError::Parse(format!("incomplete header {header:?}"))),
    }
}

/// `(Delta_1 f)_l`, with out-of-box neighbours read as zero.
pub fn discrete_laplacian(f: &LatticeField) -> LatticeField {
    let mut out = f.clone();
    f.shape().laplacian(&f.values, &mut out.values);
    out
}

/// `<f, -Delta_1 f>` evaluated as a bond sum, each bond once.
pub fn dirichlet_form(f: &LatticeField) -> f64 {
    f.shape().bond_sum(&f.values)
}

/// `H_d = mu^n [ sum_bonds (f_j - f_l)^2 / mu^2 - 1/(p+1) sum |f_l|^(2p+2) ]`.
pub fn hamiltonian_d(f: &LatticeField, p: f64) -> Result<f64> {
    validate_exponent(f.dim, p)?;
    let kinetic = dirichlet_form(f) / (f.mesh * f.mesh);
    let potential: f64 = f.values.iter().map(|v| v.abs().powf(2.0 * p + 2.0)).sum();
    Ok(f.dim.cell_volume(f.mesh) * (kinetic - potential / (p + 1.0)))
}

/// `N_d = mu^n sum f_l^2`.
pub fn norm_d(f: &LatticeField) -> f64 {
    f.dim.cell_volume(f.mesh) * f.values.iter().map(|v| v * v).sum::<f64>()
}

/// Euclidean gradient of [`hamiltonian_d`]: `2 mu^n (-mu^-2 Delta_1 f - |f|^(2p) f)`.
pub fn grad_hamiltonian_d(f: &LatticeField, p: f64) -> Result<LatticeField> {
    validate_exponent(f.dim, p)?;
    let vol = f.dim.cell_volume(f.mesh);
    let inv_mu2 = 1.0 / (f.mesh * f.mesh);
    let mut out = discrete_laplacian(f);
    for (g, &v) in out.values.iter_mut().zip(&f.values) {
        *g = 2.0 * vol * (-inv_mu2 * *g - v.abs().powf(2.0 * p) * v);
    }
    Ok(out)
}

/// Euclidean gradient of [`norm_d`]: `2 mu^n f`.
pub fn grad_norm_d(f: &LatticeField) -> LatticeField {
    f.scaled(2.0 * f.dim.cell_volume(f.mesh))
}

/// Energy-type norm `sqrt(mu^n |f|^2 + mu^(n-2) <f, -Delta_1 f>)`.
///
/// The Dirichlet form enters linearly so that the result is 1-homogeneous.
pub fn qmu_norm(f: &LatticeField) -> f64 {
    let n = f.dim.n() as i32;
    let mass = f.dim.cell_volume(f.mesh) * f.values.iter().map(|v| v * v).sum::<f64>();
    (mass + f.mesh.powi(n - 2) * dirichlet_form(f)).sqrt()
}

/// Orthogonal projection onto fields symmetric under the mode reflection.
///
/// Sites whose mirror image leaves the box have no partner and are zeroed,
/// which keeps the map idempotent on half-shifted axes.
pub fn symmetrize(f: &LatticeField, mode: &ModeSpec) -> Result<LatticeField> {
    if f.dim != mode.dim() {
        return Err(BreatherError::DimensionMismatch { left: f.dim.n(), right: mode.dim().n() });
    }
    let mut out = f.clone();
    for k in 0..f.values.len() {
        let l = f.multi_index(k);
        let m = [mode.reflect_index(0, l[0]), mode.reflect_index(1, l[1])];
        let m = if f.dim == Dim::One { [m[0], 0] } else { m };
        out.values[k] = match f.flat_index(m) {
            Some(km) => 0.5 * (f.values[k] + f.values[km]),
            None => 0.0,
        };
    }
    Ok(out)
}

/// Largest deviation between `f` and its mode reflection.
pub fn symmetry_defect(f: &LatticeField, mode: &ModeSpec) -> Result<f64> {
    let s = symmetrize(f, mode)?;
    Ok(crate::grid::max_abs(&f.sub(&s)?.values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1() -> Dim {
        Dim::One
    }

    #[test]
    fn laplacian_of_deltas() {
        let f = LatticeField::delta(d1(), 1.0, 3).unwrap();
        let l = discrete_laplacian(&f);
        assert_eq!(l.get([0, 0]), -2.0);
        assert_eq!(l.get([1, 0]), 1.0);
        assert_eq!(l.get([-1, 0]), 1.0);
        assert_eq!(l.get([2, 0]), 0.0);

        let f = LatticeField::delta(Dim::Two, 1.0, 3).unwrap();
        let l = discrete_laplacian(&f);
        assert_eq!(l.get([0, 0]), -4.0);
        for n in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            assert_eq!(l.get(n), 1.0);
        }
        assert_eq!(l.get([1, 1]), 0.0);
    }

    #[test]
    fn laplacian_annihilates_constants_in_the_interior() {
        for dim in [Dim::One, Dim::Two] {
            let f = LatticeField::from_fn(dim, 0.3, 5, |_| 2.5).unwrap();
            let l = discrete_laplacian(&f);
            for k in 0..l.len() {
                let idx = l.multi_index(k);
                let interior = idx[0].abs() < 5 && (dim == Dim::One || idx[1].abs() < 5);
                if interior {
                    assert_eq!(l.values()[k], 0.0);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_of_delta() {
        let f = LatticeField::delta(d1(), 1.0, 3).unwrap();
        assert!((hamiltonian_d(&f, 1.0).unwrap() - 1.5).abs() < 1e-15);
        let z = LatticeField::zeros(d1(), 1.0, 3).unwrap();
        assert_eq!(hamiltonian_d(&z, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn exponent_range_is_enforced() {
        let f = LatticeField::zeros(Dim::Two, 1.0, 3).unwrap();
        assert!(hamiltonian_d(&f, 1.0).is_err());
        assert!(hamiltonian_d(&f, 0.4).is_err());
        assert!(hamiltonian_d(&f, 0.5).is_ok());
        assert!(validate_exponent(Dim::One, 1.99).is_ok());
        assert!(validate_exponent(Dim::One, 2.0).is_err());
    }

    #[test]
    fn norm_and_qmu_of_delta() {
        let f = LatticeField::delta(d1(), 0.5, 3).unwrap();
        assert_eq!(norm_d(&f), 0.5);
        for mu in [0.1, 0.5, 1.0, 2.0] {
            let f = LatticeField::delta(d1(), mu, 3).unwrap();
            assert!((qmu_norm(&f) - (mu + 2.0 / mu).sqrt()).abs() < 1e-14);
        }
        let z = LatticeField::zeros(d1(), 0.5, 3).unwrap();
        assert_eq!(qmu_norm(&z), 0.0);
        assert_eq!(norm_d(&z), 0.0);
    }

    #[test]
    fn symmetrize_examples() {
        let st = ModeSpec::new(d1(), ModeLabel::SieversTakeno).unwrap();
        let mut f = LatticeField::zeros(d1(), 1.0, 3).unwrap();
        f.set([1, 0], 1.0).unwrap();
        let s = symmetrize(&f, &st).unwrap();
        assert_eq!(s.get([1, 0]), 0.5);
        assert_eq!(s.get([-1, 0]), 0.5);

        let p = ModeSpec::new(d1(), ModeLabel::Page).unwrap();
        let f = LatticeField::from_fn(d1(), 1.0, 4, |l| (l[0] as f64).sin() + 2.0).unwrap();
        let s = symmetrize(&f, &p).unwrap();
        assert_eq!(symmetrize(&s, &p).unwrap(), s);
        assert_eq!(s.get([4, 0]), 0.0);
        assert_eq!(s.get([0, 0]), s.get([-1, 0]));
        assert_eq!(s.get([3, 0]), s.get([-4, 0]));
    }

    #[test]
    fn mode_labels_round_trip() {
        for dim in [Dim::One, Dim::Two] {
            for m in ModeSpec::all(dim) {
                let again = ModeSpec::new(dim, m.label()).unwrap();
                assert_eq!(again, m);
                let parsed: ModeLabel = m.label().to_string().parse().unwrap();
                assert_eq!(parsed, m.label());
                assert_eq!(ModeSpec::from_offsets(dim, &m.offset()[..dim.n()]).unwrap(), m);
            }
        }
        assert!(ModeSpec::new(Dim::One, ModeLabel::HybridX).is_err());
        assert!(ModeSpec::from_offsets(Dim::Two, &[0.25, 0.0]).is_err());
        let hx = ModeSpec::new(Dim::Two, ModeLabel::HybridX).unwrap();
        assert_eq!(hx.offset(), [0.5, 0.0]);
    }

    #[test]
    fn geometry_is_validated() {
        assert!(LatticeField::zeros(d1(), 0.0, 3).is_err());
        assert!(LatticeField::zeros(d1(), -1.0, 3).is_err());
        assert!(LatticeField::zeros(d1(), 1.0, 1).is_err());
        assert!(LatticeField::from_values(d1(), 1.0, 2, vec![0.0; 4]).is_err());
        assert!(LatticeField::from_values(d1(), 1.0, 2, vec![0.0, 0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f = LatticeField::from_fn(Dim::Two, 0.1 + 1e-17, 3, |l| {
            (l[0] as f64 * 0.37).exp() / 3.0 - (l[1] as f64).cos() * 1e-300
        })
        .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# dim=2 mu="));
        let g = LatticeField::read_csv(&buf[..]).unwrap();
        assert_eq!(f.mesh().to_bits(), g.mesh().to_bits());
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(LatticeField::read_csv(&b""[..]).is_err());
        assert!(LatticeField::read_csv(&b"dim=1 mu=1 radius=2\n"[..]).is_err());
        assert!(LatticeField::read_csv(&b"# dim=1 mu=1 radius=2\n0,1.0\n"[..]).is_err());
        assert!(LatticeField::read_csv(&b"# dim=1 mu=1 radius=2\n9,1.0\n"[..]).is_err());
    }
}
