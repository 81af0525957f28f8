//! Repetition complexes, the iterated-product surface codes and their CSS data.
//!
//! Factor order is fixed: `E = C ⊗ D`, `F = E ⊗ D`, `G = F ⊗ C`, where `C` is
//! the repetition complex with boundary `H` and `D` the one with `H^T`.

use serde::{Deserialize, Serialize};

use crate::chain::{bounded_search, ChainComplex, Distance, WeightSearch, DEFAULT_SEARCH_BUDGET, DEFAULT_WEIGHT_CAP};
use crate::error::CodeError;
use crate::f2::{BitVec, F2Matrix};

/// Pauli type of a check, logical or measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn opposite(self) -> Basis {
        match self {
            Basis::X => Basis::Z,
            Basis::Z => Basis::X,
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::X => "X",
            Basis::Z => "Z",
        })
    }
}

impl std::str::FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Basis::X),
            "z" | "Z" => Ok(Basis::Z),
            other => Err(format!("unknown basis {other:?}")),
        }
    }
}

/// The `(L-1) × L` bidiagonal parity check matrix of the length-`L` repetition code.
pub fn repetition_pcm(l: usize) -> Result<F2Matrix, CodeError> {
    if l < 2 {
        return Err(CodeError::SideLength(l));
    }
    let mut h = F2Matrix::zeros(l - 1, l);
    for i in 0..l - 1 {
        h.set(i, i, true);
        h.set(i, i + 1, true);
    }
    Ok(h)
}

/// Two-term complex with boundary `H`, or `H^T` when `transposed`.
pub fn repetition_complex(l: usize, transposed: bool) -> Result<ChainComplex, CodeError> {
    let h = repetition_pcm(l)?;
    Ok(ChainComplex::from_boundaries(vec![if transposed {
        h.transpose()
    } else {
        h
    }]))
}

/// The product complexes `E`, `F`, `G` for side length `L`.
pub fn surface_complex(dimension: usize, l: usize) -> Result<ChainComplex, CodeError> {
    let c = repetition_complex(l, false)?;
    let d = repetition_complex(l, true)?;
    let e = c.tensor_product(&d)?;
    match dimension {
        2 => Ok(e),
        3 => Ok(e.tensor_product(&d)?),
        4 => Ok(e.tensor_product(&d)?.tensor_product(&c)?),
        other => Err(CodeError::Dimension(other)),
    }
}

/// Distances of a CSS code: `dz` is the least weight of a nontrivial Z
/// logical, `dx` of an X logical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDistance {
    pub dz: Distance,
    pub dx: Distance,
}

impl CodeDistance {
    pub fn d(&self) -> Distance {
        self.dz.min(self.dx)
    }
}

/// A CSS code with optional metachecks.
///
/// `hx` rows are X-type generators and `hz` rows Z-type generators. `mz`
/// checks Z-type syndromes (`mz · hz = 0`) and `mx` checks X-type syndromes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CssCode {
    pub n: usize,
    pub k: usize,
    pub distance: CodeDistance,
    pub hx: F2Matrix,
    pub hz: F2Matrix,
    pub mx: Option<F2Matrix>,
    pub mz: Option<F2Matrix>,
    pub logicals_x: Vec<BitVec>,
    pub logicals_z: Vec<BitVec>,
    /// Whether the logicals are minimum weight (false if a search hit its cap).
    pub logicals_minimal: bool,
    pub qubit_grade: Option<usize>,
}

/// Which code to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceCodeSpec {
    pub dimension: usize,
    pub l: usize,
    /// Qubit grade; forced for 2D (1) and 4D (2), defaults to 1 for 3D.
    pub grade: Option<usize>,
}

impl SurfaceCodeSpec {
    pub fn new(dimension: usize, l: usize) -> Self {
        Self {
            dimension,
            l,
            grade: None,
        }
    }

    pub fn resolved_grade(&self) -> Result<usize, CodeError> {
        let forced = match self.dimension {
            2 => Some(1),
            4 => Some(2),
            3 => None,
            other => return Err(CodeError::Dimension(other)),
        };
        match (forced, self.grade) {
            (Some(f), None) => Ok(f),
            (Some(f), Some(g)) if g == f => Ok(f),
            (Some(f), Some(g)) => Err(CodeError::Grade {
                grade: g,
                reason: format!("{}D codes place qubits at grade {f}", self.dimension),
            }),
            (None, None) => Ok(1),
            (None, Some(g)) if g == 1 || g == 2 => Ok(g),
            (None, Some(g)) => Err(CodeError::Grade {
                grade: g,
                reason: "3D codes place qubits at grade 1 or 2".into(),
            }),
        }
    }

    /// Parses `"4d:2"`, `"3d:3:2"` (dimension, side length, optional grade).
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let dim = parts
            .first()
            .and_then(|p| p.trim_end_matches(['d', 'D']).parse().ok())
            .ok_or_else(|| format!("bad code spec {s:?}"))?;
        let l = parts
            .get(1)
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| format!("bad code spec {s:?}"))?;
        let grade = match parts.get(2) {
            Some(g) => Some(g.parse().map_err(|_| format!("bad grade in {s:?}"))?),
            None => None,
        };
        Ok(Self {
            dimension: dim,
            l,
            grade,
        })
    }
}

impl std::fmt::Display for SurfaceCodeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}d:{}", self.dimension, self.l)?;
        if let Some(g) = self.grade {
            write!(f, ":{g}")?;
        }
        Ok(())
    }
}

/// Limits for the exhaustive searches done while building a code.
#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    pub cap: usize,
    pub budget: u128,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            cap: DEFAULT_WEIGHT_CAP,
            budget: DEFAULT_SEARCH_BUDGET,
        }
    }
}

/// Builds the `dimension`-D surface code of side `L`.
pub fn surface_code(spec: SurfaceCodeSpec) -> Result<CssCode, CodeError> {
    surface_code_with_limits(spec, SearchLimits::default())
}

pub fn surface_code_with_limits(spec: SurfaceCodeSpec, limits: SearchLimits) -> Result<CssCode, CodeError> {
    let grade = spec.resolved_grade()?;
    let complex = surface_complex(spec.dimension, spec.l)?;
    CssCode::from_complex(&complex, grade, limits)
}

impl CssCode {
    /// Slices the CSS code with qubits at `grade`: `H_Z^T = ∂_{grade+1}`,
    /// `H_X = ∂_grade`, `M_Z^T = ∂_{grade+2}`, `M_X = ∂_{grade-1}`.
    pub fn from_complex(c: &ChainComplex, grade: usize, limits: SearchLimits) -> Result<CssCode, CodeError> {
        let (Some(hx), Some(hz_t)) = (c.boundary_ref(grade), c.boundary_ref(grade + 1)) else {
            return Err(CodeError::Grade {
                grade,
                reason: format!("needs boundary maps on both sides (complex top grade {})", c.top()),
            });
        };
        let k = c.homology_dim(grade)?;
        let dz = bounded_search(c, grade, limits.cap, limits.budget, false)?;
        let dx = bounded_search(c, grade, limits.cap, limits.budget, true)?;
        let mz = c.boundary_ref(grade + 2).map(F2Matrix::transpose);
        let mx = if grade >= 2 {
            c.boundary_ref(grade - 1).cloned()
        } else {
            None
        };
        let mut code = CssCode {
            n: c.dim(grade),
            k,
            distance: CodeDistance { dz, dx },
            hx: hx.clone(),
            hz: hz_t.transpose(),
            mx,
            mz,
            logicals_x: Vec::new(),
            logicals_z: Vec::new(),
            logicals_minimal: true,
            qubit_grade: Some(grade),
        };
        code.fill_logicals(limits);
        Ok(code)
    }

    /// A code from explicit check matrices; distances are searched up to `limits`.
    pub fn from_matrices(
        hx: F2Matrix,
        hz: F2Matrix,
        mx: Option<F2Matrix>,
        mz: Option<F2Matrix>,
        limits: SearchLimits,
    ) -> Result<CssCode, CodeError> {
        assert_eq!(hx.cols(), hz.cols(), "check matrices act on different qubit counts");
        let c = ChainComplex::from_boundaries(vec![hz.transpose(), hx.clone()]);
        if !c.validate() {
            return Err(CodeError::Chain(crate::error::ChainError::Invalid(
                "H_X H_Z^T != 0".into(),
            )));
        }
        let mut code = CssCode::from_complex(&c, 1, limits)?;
        code.mx = mx;
        code.mz = mz;
        code.qubit_grade = None;
        Ok(code)
    }

    fn fill_logicals(&mut self, limits: SearchLimits) {
        if self.k == 0 {
            return;
        }
        match logical_representatives_with(self, limits) {
            Ok((lx, lz)) => {
                self.logicals_x = lx;
                self.logicals_z = lz;
            }
            Err(_) => {
                let (lx, lz) = homology_basis_logicals(self);
                self.logicals_x = lx;
                self.logicals_z = lz;
                self.logicals_minimal = false;
            }
        }
    }

    pub fn d(&self) -> Distance {
        self.distance.d()
    }

    pub fn checks(&self, basis: Basis) -> &F2Matrix {
        match basis {
            Basis::X => &self.hx,
            Basis::Z => &self.hz,
        }
    }

    pub fn metachecks(&self, basis: Basis) -> Option<&F2Matrix> {
        match basis {
            Basis::X => self.mx.as_ref(),
            Basis::Z => self.mz.as_ref(),
        }
    }

    pub fn logicals(&self, basis: Basis) -> &[BitVec] {
        match basis {
            Basis::X => &self.logicals_x,
            Basis::Z => &self.logicals_z,
        }
    }

    /// Commutation, metacheck and logical pairing relations, bit-exact.
    pub fn check_relations(&self) -> Result<(), String> {
        if !self.hx.mul(&self.hz.transpose()).is_zero() {
            return Err("H_X H_Z^T != 0".into());
        }
        if let Some(mx) = &self.mx {
            if !mx.mul(&self.hx).is_zero() {
                return Err("M_X H_X != 0".into());
            }
        }
        if let Some(mz) = &self.mz {
            if !mz.mul(&self.hz).is_zero() {
                return Err("M_Z H_Z != 0".into());
            }
        }
        for (i, lz) in self.logicals_z.iter().enumerate() {
            if !self.hx.mul_vec(lz).is_zero() {
                return Err(format!("logical Z {i} anticommutes with an X check"));
            }
            for (j, lx) in self.logicals_x.iter().enumerate() {
                if lx.dot(lz) != (i == j) {
                    return Err(format!("pairing of X{j} and Z{i} is not δ"));
                }
            }
        }
        for (i, lx) in self.logicals_x.iter().enumerate() {
            if !self.hz.mul_vec(lx).is_zero() {
                return Err(format!("logical X {i} anticommutes with a Z check"));
            }
        }
        Ok(())
    }

    /// Metacheck matrix on the given side or an error.
    pub fn require_metachecks(&self, side: Basis) -> Result<&F2Matrix, CodeError> {
        self.metachecks(side).ok_or(CodeError::NoMetachecks(match side {
            Basis::X => "X",
            Basis::Z => "Z",
        }))
    }
}

/// Searches for nontrivial `basis`-type logicals: vectors orthogonal to the
/// opposite checks and outside the row space of same-type checks. The latter
/// is detected by a nonzero pairing with some element of `ker(same-type checks)`.
fn logical_search(code: &CssCode, basis: Basis) -> WeightSearch {
    let (commute_with, trivial) = match basis {
        Basis::Z => (&code.hx, &code.hz),
        Basis::X => (&code.hz, &code.hx),
    };
    let annihilator = F2Matrix::from_rows(code.n, trivial.kernel_basis());
    WeightSearch::new(commute_with, Some(&annihilator))
}

/// Minimum-weight logical representatives with `δ_ij` pairing.
pub fn logical_representatives(code: &CssCode) -> Result<(Vec<BitVec>, Vec<BitVec>), CodeError> {
    logical_representatives_with(code, SearchLimits::default())
}

pub fn logical_representatives_with(
    code: &CssCode,
    limits: SearchLimits,
) -> Result<(Vec<BitVec>, Vec<BitVec>), CodeError> {
    if code.k == 0 {
        return Err(CodeError::NoLogicals);
    }
    let lz = independent_logicals(code, Basis::Z, limits)?;
    let lx = independent_logicals(code, Basis::X, limits)?;
    Ok((normalize_pairing(&lx, &lz), lz))
}

/// Collects `k` logicals independent modulo stabilizers, increasing weight first.
fn independent_logicals(code: &CssCode, basis: Basis, limits: SearchLimits) -> Result<Vec<BitVec>, CodeError> {
    let search = logical_search(code, basis);
    if search.candidates_up_to(limits.cap) > limits.budget {
        return Err(CodeError::CapExceeded(limits.cap));
    }
    let trivial = match basis {
        Basis::Z => &code.hz,
        Basis::X => &code.hx,
    };
    let mut span = trivial.clone();
    let mut out = Vec::new();
    for w in 1..=limits.cap {
        for support in search.all_of_weight(w) {
            let v = BitVec::from_indices(code.n, support);
            if !span.in_row_space(&v).expect("lengths agree") {
                span = span.vstack(&F2Matrix::from_rows(code.n, vec![v.clone()]));
                out.push(v);
                if out.len() == code.k {
                    return Ok(out);
                }
            }
        }
    }
    Err(CodeError::CapExceeded(limits.cap))
}

/// Replaces X logicals by combinations so that `lx_i · lz_j = δ_ij`.
fn normalize_pairing(lx: &[BitVec], lz: &[BitVec]) -> Vec<BitVec> {
    let k = lx.len();
    // pairing[i][j] = lx_i · lz_j; find A with A · pairing = I, then lx' = A lx.
    let pairing = F2Matrix::from_rows(
        k,
        lx.iter()
            .map(|x| BitVec::from_indices(k, (0..k).filter(|&j| x.dot(&lz[j]))))
            .collect(),
    );
    if pairing == F2Matrix::identity(k) {
        return lx.to_vec();
    }
    let pt = pairing.transpose();
    (0..k)
        .map(|i| {
            // Row i of A solves pairing^T a = e_i.
            let a = pt
                .solve(&BitVec::from_indices(k, [i]))
                .expect("square system")
                .expect("nondegenerate pairing");
            let mut v = BitVec::zeros(lx[0].len());
            for j in a.ones() {
                v.xor_assign(&lx[j]);
            }
            v
        })
        .collect()
}

/// Logical bases from linear algebra alone, used when the weight search cannot finish.
fn homology_basis_logicals(code: &CssCode) -> (Vec<BitVec>, Vec<BitVec>) {
    let pick = |commute_with: &F2Matrix, trivial: &F2Matrix| {
        let mut span = trivial.clone();
        let mut out = Vec::new();
        for v in commute_with.kernel_basis() {
            if !span.in_row_space(&v).expect("lengths agree") {
                span = span.vstack(&F2Matrix::from_rows(v.len(), vec![v.clone()]));
                out.push(v);
            }
        }
        out
    };
    let lz = pick(&code.hx, &code.hz);
    let lx = pick(&code.hz, &code.hx);
    (normalize_pairing(&lx, &lz), lz)
}

/// Every nontrivial `basis`-type logical of exactly weight `w`.
pub fn logicals_of_weight(code: &CssCode, basis: Basis, w: usize) -> Vec<BitVec> {
    logical_search(code, basis)
        .all_of_weight(w)
        .into_iter()
        .map(|s| BitVec::from_indices(code.n, s))
        .collect()
}

/// Classical distance of the metacheck matrix on `side`: least weight of a
/// nonzero vector in its kernel.
pub fn metacheck_code_distance(code: &CssCode, side: Basis) -> Result<Distance, CodeError> {
    let m = code.require_metachecks(side)?;
    if m.rank() == m.cols() {
        return Ok(Distance::Infinite);
    }
    let search = WeightSearch::new(m, None);
    let limits = SearchLimits::default();
    let mut cap = 0;
    while cap < limits.cap && search.candidates_up_to(cap + 1) <= limits.budget {
        cap += 1;
    }
    Ok(match search.min_weight(cap) {
        Some(s) => Distance::Finite(s.len()),
        None => Distance::AtLeast(cap + 1),
    })
}

/// `[[n, k, d]]` predicted by the closed-form parameter families.
pub fn formula_parameters(dimension: usize, l: usize) -> Option<(usize, usize, usize)> {
    match dimension {
        2 => Some((l * l + (l - 1) * (l - 1), 1, l)),
        3 => Some((l * l * l + 2 * l * (l - 1) * (l - 1), 1, l.min(l * l))),
        4 => Some((6 * l.pow(4) + 10 * l * l + 1 - 12 * l.pow(3) - 4 * l, 1, l * l)),
        _ => None,
    }
}
