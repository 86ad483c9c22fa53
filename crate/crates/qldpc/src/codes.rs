//! CSS code construction from polynomial specifications.
//!
//! Supports three families over the cyclic group algebra: generalized bicycle
//! (GB) codes in one variable, bivariate bicycle (BB) codes in two commuting
//! variables x = S_l (x) I_m and y = I_l (x) S_m, and coprime-BB codes whose
//! single variable pi = xy is expanded to (e mod l, e mod m) exponent pairs so
//! the BB construction path serves both. Check matrices are H_X = [A|B] and
//! H_Z = [B^T|A^T], which satisfy the CSS condition because A and B commute.

use crate::gf2::{BinMatrix, BinVector, Gf2Error};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate monomial {term} after exponent reduction")]
    DuplicateTerm { term: String },
    #[error("invalid code specification: {0}")]
    Invalid(String),
    #[error("CSS condition violated: hx * hz^T != 0")]
    CssViolation,
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// One monomial x^i y^j of a code polynomial, exponents already reduced
/// modulo l and m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolyTerm {
    pub x_exp: usize,
    pub y_exp: usize,
}

impl PolyTerm {
    pub fn new(x_exp: usize, y_exp: usize) -> Self {
        Self { x_exp, y_exp }
    }
}

impl fmt::Display for PolyTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.x_exp, self.y_exp) {
            (0, 0) => write!(f, "1"),
            (x, 0) => write!(f, "x^{x}"),
            (0, y) => write!(f, "y^{y}"),
            (x, y) => write!(f, "x^{x}*y^{y}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeFamily {
    Gb,
    Bb,
    CoprimeBb,
}

impl CodeFamily {
    fn label(self) -> &'static str {
        match self {
            CodeFamily::Gb => "gb",
            CodeFamily::Bb => "bb",
            CodeFamily::CoprimeBb => "coprime-bb",
        }
    }
}

/// Polynomial specification of a GB/BB/coprime-BB code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    pub family: CodeFamily,
    pub l: usize,
    pub m: usize,
    pub a_terms: Vec<PolyTerm>,
    pub b_terms: Vec<PolyTerm>,
    pub name: String,
}

impl CodeSpec {
    /// Validates sizes, reduces exponents, and rejects duplicate monomials.
    pub fn new(
        family: CodeFamily,
        l: usize,
        m: usize,
        a_terms: Vec<PolyTerm>,
        b_terms: Vec<PolyTerm>,
        name: impl Into<String>,
    ) -> Result<Self, CodeError> {
        if l == 0 || m == 0 {
            return Err(CodeError::Invalid(format!(
                "l and m must be positive, got l={l} m={m}"
            )));
        }
        if family == CodeFamily::Gb && m != 1 {
            return Err(CodeError::Invalid(format!(
                "GB codes require m = 1, got m={m}"
            )));
        }
        let a_terms = reduce_terms(a_terms, l, m)?;
        let b_terms = reduce_terms(b_terms, l, m)?;
        if a_terms.is_empty() || b_terms.is_empty() {
            return Err(CodeError::Invalid(
                "polynomials must have at least one term".into(),
            ));
        }
        Ok(Self {
            family,
            l,
            m,
            a_terms,
            b_terms,
            name: name.into(),
        })
    }

    /// Coprime-BB constructor from pi-exponents, pi = xy.
    pub fn coprime(
        l: usize,
        m: usize,
        a_pi_exps: &[usize],
        b_pi_exps: &[usize],
        name: impl Into<String>,
    ) -> Result<Self, CodeError> {
        if l == 0 || m == 0 {
            return Err(CodeError::Invalid(format!(
                "l and m must be positive, got l={l} m={m}"
            )));
        }
        let expand = |exps: &[usize]| -> Vec<PolyTerm> {
            exps.iter().map(|&e| PolyTerm::new(e % l, e % m)).collect()
        };
        Self::new(
            CodeFamily::CoprimeBb,
            l,
            m,
            expand(a_pi_exps),
            expand(b_pi_exps),
            name,
        )
    }

    /// Text form `family l m a:<terms> b:<terms>`, reparseable by
    /// [`parse_spec`].
    pub fn to_spec_string(&self) -> String {
        let terms = |ts: &[PolyTerm]| {
            ts.iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{} {} {} a:{} b:{}",
            self.family.label(),
            self.l,
            self.m,
            terms(&self.a_terms),
            terms(&self.b_terms)
        )
    }
}

fn reduce_terms(terms: Vec<PolyTerm>, l: usize, m: usize) -> Result<Vec<PolyTerm>, CodeError> {
    let mut reduced: Vec<PolyTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        let r = PolyTerm::new(t.x_exp % l, t.y_exp % m);
        if reduced.contains(&r) {
            return Err(CodeError::DuplicateTerm {
                term: r.to_string(),
            });
        }
        reduced.push(r);
    }
    Ok(reduced)
}

/// Parse the `family l m a:<terms> b:<terms>` format. Comment (`#`) and blank
/// lines are skipped; the first remaining line must hold the whole spec.
pub fn parse_spec(text: &str) -> Result<CodeSpec, CodeError> {
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        return parse_spec_line(line, line_no);
    }
    Err(CodeError::Parse {
        line: 1,
        msg: "no code specification found".into(),
    })
}

fn parse_spec_line(line: &str, line_no: usize) -> Result<CodeSpec, CodeError> {
    let err = |msg: String| CodeError::Parse { line: line_no, msg };
    let mut tokens = line.split_whitespace();
    let family = match tokens
        .next()
        .ok_or_else(|| err("missing family".into()))?
        .to_ascii_lowercase()
        .as_str()
    {
        "gb" => CodeFamily::Gb,
        "bb" => CodeFamily::Bb,
        "coprime-bb" | "coprimebb" | "cbb" => CodeFamily::CoprimeBb,
        other => return Err(err(format!("unknown family `{other}`"))),
    };
    let parse_count = |tok: Option<&str>, what: &str| -> Result<usize, CodeError> {
        tok.ok_or_else(|| err(format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|_| err(format!("malformed {what}")))
    };
    let l = parse_count(tokens.next(), "l")?;
    let m = parse_count(tokens.next(), "m")?;
    let mut a_terms = None;
    let mut b_terms = None;
    for tok in tokens {
        let lower = tok.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("a:") {
            a_terms = Some(parse_terms(rest, l, m, line_no)?);
        } else if let Some(rest) = lower.strip_prefix("b:") {
            b_terms = Some(parse_terms(rest, l, m, line_no)?);
        } else {
            return Err(err(format!("unexpected token `{tok}`")));
        }
    }
    let a_terms = a_terms.ok_or_else(|| err("missing a: polynomial".into()))?;
    let b_terms = b_terms.ok_or_else(|| err("missing b: polynomial".into()))?;
    CodeSpec::new(
        family,
        l,
        m,
        a_terms,
        b_terms,
        format!("{} {l} {m}", family.label()),
    )
    .map_err(|e| match e {
        CodeError::Parse { .. } => e,
        other => err(other.to_string()),
    })
}

/// Terms are comma-separated monomials: `1`, `x`, `y^2`, `x^3*y^7`, `pi^31`.
fn parse_terms(text: &str, l: usize, m: usize, line_no: usize) -> Result<Vec<PolyTerm>, CodeError> {
    let err = |msg: String| CodeError::Parse { line: line_no, msg };
    let mut terms = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(err("empty monomial".into()));
        }
        if part == "1" {
            terms.push(PolyTerm::new(0, 0));
            continue;
        }
        let mut x_exp = 0usize;
        let mut y_exp = 0usize;
        for factor in part.split('*') {
            let (var, exp) = match factor.split_once('^') {
                Some((v, e)) => {
                    let exp = e
                        .parse::<usize>()
                        .map_err(|_| err(format!("malformed exponent in `{part}`")))?;
                    (v, exp)
                }
                None => (factor, 1),
            };
            match var {
                "x" => x_exp += exp,
                "y" => y_exp += exp,
                "pi" => {
                    x_exp += exp % l;
                    y_exp += exp % m;
                }
                other => return Err(err(format!("unknown variable `{other}` in `{part}`"))),
            }
        }
        terms.push(PolyTerm::new(x_exp, y_exp));
    }
    Ok(terms)
}

/// A CSS code with computed logical operator bases.
///
/// Invariants checked at construction: hx * hz^T = 0, k = n - rank(hx) -
/// rank(hz), each logical basis lies in the opposing kernel and outside the
/// same-sector check rowspace, and the lx * lz^T pairing has full rank k.
#[derive(Debug, Clone)]
pub struct CssCode {
    pub n: usize,
    pub k: usize,
    pub hx: BinMatrix,
    pub hz: BinMatrix,
    pub lx: BinMatrix,
    pub lz: BinMatrix,
    pub spec: Option<CodeSpec>,
}

/// Error sectors of a CSS code. `Z` means Z-type errors, detected by the
/// X-type checks; `X` the converse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    X,
    Z,
}

impl Sector {
    pub fn label(self) -> &'static str {
        match self {
            Sector::X => "x",
            Sector::Z => "z",
        }
    }
}

/// Decoding view of one sector: the checks that see the error, the stabilizer
/// rows that act trivially on it, and the opposing logical basis whose pairing
/// witnesses a logical failure.
#[derive(Debug, Clone, Copy)]
pub struct SectorView<'a> {
    pub checks: &'a BinMatrix,
    pub stabilizers: &'a BinMatrix,
    pub pairing: &'a BinMatrix,
}

impl CssCode {
    /// Build a CSS code from raw check matrices, computing logicals and
    /// verifying all invariants.
    pub fn from_checks(hx: BinMatrix, hz: BinMatrix) -> Result<Self, CodeError> {
        if hx.cols() != hz.cols() {
            return Err(CodeError::Invalid(format!(
                "hx has {} columns but hz has {}",
                hx.cols(),
                hz.cols()
            )));
        }
        if !hx.mul(&hz.transpose())?.is_zero() {
            return Err(CodeError::CssViolation);
        }
        let n = hx.cols();
        let k = n - hx.rank() - hz.rank();
        let (lx, lz) = compute_logicals(&hx, &hz)?;
        assert_eq!(lx.rows(), k, "logical count mismatch");
        assert_eq!(lz.rows(), k, "logical count mismatch");
        assert_eq!(
            lx.mul(&lz.transpose())?.rank(),
            k,
            "degenerate logical pairing"
        );
        Ok(Self {
            n,
            k,
            hx,
            hz,
            lx,
            lz,
            spec: None,
        })
    }

    pub fn sector(&self, sector: Sector) -> SectorView<'_> {
        match sector {
            Sector::Z => SectorView {
                checks: &self.hx,
                stabilizers: &self.hz,
                pairing: &self.lx,
            },
            Sector::X => SectorView {
                checks: &self.hz,
                stabilizers: &self.hx,
                pairing: &self.lz,
            },
        }
    }
}

/// Build the code defined by a polynomial specification.
pub fn build_code(spec: &CodeSpec) -> Result<CssCode, CodeError> {
    let (l, m) = (spec.l, spec.m);
    let a = polynomial_matrix(l, m, &spec.a_terms)?;
    let b = polynomial_matrix(l, m, &spec.b_terms)?;
    let hx = a.hstack(&b)?;
    let hz = b.transpose().hstack(&a.transpose())?;
    let mut code = CssCode::from_checks(hx, hz)?;
    debug_assert_eq!(code.n, 2 * l * m);
    code.spec = Some(spec.clone());
    Ok(code)
}

/// Sum of kron(S_l^i, S_m^j) over the monomials x^i y^j.
fn polynomial_matrix(l: usize, m: usize, terms: &[PolyTerm]) -> Result<BinMatrix, CodeError> {
    let pow_l = shift_powers(l, terms.iter().map(|t| t.x_exp).max().unwrap_or(0))?;
    let pow_m = shift_powers(m, terms.iter().map(|t| t.y_exp).max().unwrap_or(0))?;
    let mut sum = BinMatrix::zeros(l * m, l * m);
    for t in terms {
        sum.xor_assign(&pow_l[t.x_exp].kron(&pow_m[t.y_exp]));
    }
    Ok(sum)
}

fn shift_powers(size: usize, max_exp: usize) -> Result<Vec<BinMatrix>, CodeError> {
    let shift = BinMatrix::shift_matrix(size)?;
    let mut powers = vec![BinMatrix::identity(size)];
    for e in 1..=max_exp {
        powers.push(powers[e - 1].mul(&shift)?);
    }
    Ok(powers)
}

/// Compute paired logical bases: lx spans ker(hz) modulo rowspace(hx), lz
/// spans ker(hx) modulo rowspace(hz). Basis choice is pivot-order
/// deterministic, not canonical.
pub fn compute_logicals(
    hx: &BinMatrix,
    hz: &BinMatrix,
) -> Result<(BinMatrix, BinMatrix), CodeError> {
    if !hx.mul(&hz.transpose())?.is_zero() {
        return Err(CodeError::CssViolation);
    }
    let lx = quotient_basis(&hz.kernel_basis(), hx);
    let lz = quotient_basis(&hx.kernel_basis(), hz);
    Ok((lx, lz))
}

/// Rows of `kernel` that are independent modulo rowspace(`checks`), reduced
/// against the running span for determinism.
fn quotient_basis(kernel: &BinMatrix, checks: &BinMatrix) -> BinMatrix {
    let n = kernel.cols();
    let mut span = IncrementalSpan::new();
    for i in 0..checks.rows() {
        span.insert(checks.row(i));
    }
    let mut basis_rows = Vec::new();
    for i in 0..kernel.rows() {
        if let Some(reduced) = span.insert(kernel.row(i)) {
            basis_rows.push(reduced);
        }
    }
    BinMatrix::from_rows(n, &basis_rows)
}

/// Row space maintained incrementally: one stored row per pivot column.
struct IncrementalSpan {
    rows: Vec<(usize, BinVector)>,
}

impl IncrementalSpan {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Reduce v against the span. Returns the reduced vector when it is
    /// independent (and absorbs it); None when v was already in the span.
    fn insert(&mut self, mut v: BinVector) -> Option<BinVector> {
        for (pivot, row) in &self.rows {
            if v.get(*pivot) {
                v.xor_assign(row);
            }
        }
        let pivot = v.ones().next()?;
        self.rows.push((pivot, v.clone()));
        Some(v)
    }
}

/// Randomized information-set probe for a low-weight logical representative.
///
/// Scans the raw lz rows, then `budget` rounds of column-permuted elimination
/// over [hz; lz], keeping the lightest row that is a genuine logical (outside
/// rowspace(hz)). The result is an upper bound on the code distance; with
/// budget 0 it degenerates to the lightest raw logical basis row.
pub fn min_weight_logical_upper_bound(code: &CssCode, budget: usize) -> usize {
    let hz_ech = code.hz.echelon();
    let mut best = (0..code.lz.rows())
        .map(|i| code.lz.row(i).weight())
        .min()
        .unwrap_or(0);
    if budget == 0 || code.k == 0 {
        return best;
    }
    let stacked = code
        .hz
        .vstack(&code.lz)
        .expect("hz and lz share a column count");
    let n = stacked.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d157);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..budget {
        perm.shuffle(&mut rng);
        let ech = stacked.permute_cols(&perm).echelon();
        for i in 0..ech.rank() {
            let row = ech.reduced.row(i);
            let weight = row.weight();
            if weight == 0 || weight >= best {
                continue;
            }
            let mut unpermuted = BinVector::zeros(n);
            for j in row.ones() {
                unpermuted.set(perm[j], true);
            }
            if !hz_ech.reduce_vector(&unpermuted).is_zero() {
                best = weight;
            }
        }
    }
    best
}

/// The six code constructions used throughout: bb72, bb144, bb288, cbb126,
/// cbb154, gb254.
pub fn builtin_names() -> &'static [&'static str] {
    &["bb72", "bb144", "bb288", "cbb126", "cbb154", "gb254"]
}

pub fn builtin_spec(name: &str) -> Option<CodeSpec> {
    let t = PolyTerm::new;
    let spec = match name {
        "bb72" => CodeSpec::new(
            CodeFamily::Bb,
            6,
            6,
            vec![t(3, 0), t(0, 1), t(0, 2)],
            vec![t(0, 3), t(1, 0), t(2, 0)],
            "bb72",
        ),
        "bb144" => CodeSpec::new(
            CodeFamily::Bb,
            12,
            6,
            vec![t(3, 0), t(0, 1), t(0, 2)],
            vec![t(0, 3), t(1, 0), t(2, 0)],
            "bb144",
        ),
        "bb288" => CodeSpec::new(
            CodeFamily::Bb,
            12,
            12,
            vec![t(3, 0), t(0, 2), t(0, 7)],
            vec![t(0, 3), t(1, 0), t(2, 0)],
            "bb288",
        ),
        "cbb126" => CodeSpec::coprime(7, 9, &[0, 1, 58], &[0, 13, 41], "cbb126"),
        "cbb154" => CodeSpec::coprime(7, 11, &[0, 1, 31], &[0, 19, 53], "cbb154"),
        "gb254" => CodeSpec::new(
            CodeFamily::Gb,
            127,
            1,
            vec![t(0, 0), t(15, 0), t(20, 0), t(28, 0), t(66, 0)],
            vec![t(0, 0), t(58, 0), t(59, 0), t(100, 0), t(121, 0)],
            "gb254",
        ),
        _ => return None,
    };
    Some(spec.expect("builtin specs are valid"))
}

pub fn build_builtin(name: &str) -> Option<CssCode> {
    builtin_spec(name).map(|s| build_code(&s).expect("builtin codes construct"))
}

/// Checks of the (7,4) Hamming code; hx = hz gives the standard `[[7,1,3]]`
/// self-dual CSS test fixture.
pub fn hamming_fixture() -> CssCode {
    let h = BinMatrix::from_fn(3, 7, |i, j| (j + 1) >> (2 - i) & 1 == 1);
    CssCode::from_checks(h.clone(), h).expect("fixture is a valid CSS code")
}
