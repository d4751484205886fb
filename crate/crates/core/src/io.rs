//! JSON encoding shared with the command-line tool.
//!
//! Matrices are row arrays of `[re, im]` pairs. Decoding failures carry the
//! JSON pointer of the offending value.

use serde_json::{json, Map, Value};

use crate::algebra::{MapKind, MatrixStarAlgebra, PositiveMap};
use crate::error::{Error, Result};
use crate::independence::{AlternatingWord, Leg, Letter};
use crate::linalg::{c, CMat};
use crate::module::{HilbertModule, LeftAction};

/// Position inside a JSON document.
#[derive(Clone, Debug, Default)]
pub struct Pointer(String);

impl Pointer {
    pub fn root() -> Self {
        Self(String::new())
    }

    pub fn key(&self, k: &str) -> Self {
        Self(format!("{}/{}", self.0, k.replace('~', "~0").replace('/', "~1")))
    }

    pub fn index(&self, i: usize) -> Self {
        Self(format!("{}/{i}", self.0))
    }

    pub fn as_str(&self) -> &str {
        if self.0.is_empty() {
            ""
        } else {
            &self.0
        }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Schema {
            pointer: if self.0.is_empty() { "/".into() } else { self.0.clone() },
            message: message.into(),
        }
    }

    /// Attach this position to a construction error.
    pub fn wrap<T>(&self, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Schema { .. } => e,
            other => self.error(other.to_string()),
        })
    }
}

fn object<'a>(v: &'a Value, at: &Pointer) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| at.error("expected an object"))
}

fn array<'a>(v: &'a Value, at: &Pointer) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| at.error("expected an array"))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &Pointer) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| at.key(key).error(format!("missing field \"{key}\"")))
}

fn number(v: &Value, at: &Pointer) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| at.error("expected a number"))?;
    if !x.is_finite() {
        return Err(at.error("number is not finite"));
    }
    Ok(x)
}

pub fn count(v: &Value, at: &Pointer) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| at.error("expected a nonnegative integer"))
}

pub fn decode_matrix(v: &Value, at: &Pointer) -> Result<CMat> {
    let rows = array(v, at)?;
    if rows.is_empty() {
        return Err(at.error("matrix has no rows"));
    }
    let mut width = None;
    let mut entries = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let at_row = at.index(i);
        let cells = array(row, &at_row)?;
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(at_row.error(format!("row has {} entries, expected {w}", cells.len())))
            }
            _ => {}
        }
        for (j, cell) in cells.iter().enumerate() {
            let at_cell = at_row.index(j);
            let pair = array(cell, &at_cell)?;
            if pair.len() != 2 {
                return Err(at_cell.error("expected a [re, im] pair"));
            }
            entries.push(c(number(&pair[0], &at_cell.index(0))?, number(&pair[1], &at_cell.index(1))?));
        }
    }
    let w = width.unwrap_or(0);
    if w == 0 {
        return Err(at.error("matrix has no columns"));
    }
    Ok(CMat::from_row_slice(rows.len(), w, &entries))
}

pub fn encode_matrix(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn decode_matrices(v: &Value, at: &Pointer) -> Result<Vec<CMat>> {
    array(v, at)?
        .iter()
        .enumerate()
        .map(|(i, m)| decode_matrix(m, &at.index(i)))
        .collect()
}

/// `{"ambient_dim", "basis", "unit"}`, or the shorthands `{"full": d}`,
/// `{"diagonal": d}` and `{"scalars": null}`.
pub fn decode_algebra(v: &Value, at: &Pointer) -> Result<MatrixStarAlgebra> {
    let obj = object(v, at)?;
    if let Some(d) = obj.get("full") {
        let d = count(d, &at.key("full"))?;
        return at.wrap(nonzero(d, &at.key("full")).map(MatrixStarAlgebra::full));
    }
    if let Some(d) = obj.get("diagonal") {
        let d = count(d, &at.key("diagonal"))?;
        return at.wrap(nonzero(d, &at.key("diagonal")).map(MatrixStarAlgebra::diagonal));
    }
    if obj.contains_key("scalars") {
        return Ok(MatrixStarAlgebra::scalars());
    }
    let dim = count(field(obj, "ambient_dim", at)?, &at.key("ambient_dim"))?;
    let basis = decode_matrices(field(obj, "basis", at)?, &at.key("basis"))?;
    for (i, b) in basis.iter().enumerate() {
        if b.nrows() != dim || b.ncols() != dim {
            return Err(at.key("basis").index(i).error(format!(
                "basis element is {}x{}, ambient_dim is {dim}",
                b.nrows(),
                b.ncols()
            )));
        }
    }
    let unit = match obj.get("unit") {
        None | Some(Value::Null) => None,
        Some(u) => Some(decode_matrix(u, &at.key("unit"))?),
    };
    at.wrap(MatrixStarAlgebra::new(basis, unit))
}

fn nonzero(d: usize, at: &Pointer) -> Result<usize> {
    if d == 0 {
        Err(at.error("dimension must be at least 1"))
    } else {
        Ok(d)
    }
}

pub fn encode_algebra(a: &MatrixStarAlgebra) -> Value {
    json!({
        "ambient_dim": a.ambient_dim(),
        "basis": a.basis().iter().map(encode_matrix).collect::<Vec<_>>(),
        "unit": encode_matrix(a.unit()),
    })
}

/// `{"kind", "domain", "codomain"?, "matrix"}` with the matrix in basis
/// coordinates. Instead of `matrix`, a state may give `density` and a CP map
/// on a full algebra may give `kraus` operators.
pub fn decode_map(v: &Value, at: &Pointer) -> Result<PositiveMap> {
    let obj = object(v, at)?;
    let kind_at = at.key("kind");
    let kind_str = field(obj, "kind", at)?
        .as_str()
        .ok_or_else(|| kind_at.error("expected a string"))?;
    let kind = MapKind::parse(kind_str)
        .ok_or_else(|| kind_at.error(format!("unknown map kind \"{kind_str}\"")))?;
    let domain = decode_algebra(field(obj, "domain", at)?, &at.key("domain"))?;
    if let Some(rho) = obj.get("density") {
        if kind != MapKind::State {
            return Err(at.key("density").error("a density defines a state"));
        }
        let rho = decode_matrix(rho, &at.key("density"))?;
        return at.wrap(PositiveMap::state_from_density(domain, &rho));
    }
    if let Some(ks) = obj.get("kraus") {
        if kind != MapKind::CpMap {
            return Err(at.key("kraus").error("Kraus operators define a cp_map"));
        }
        let ks = decode_matrices(ks, &at.key("kraus"))?;
        return at.wrap(PositiveMap::from_kraus(domain, &ks));
    }
    let codomain = match obj.get("codomain") {
        Some(cv) => decode_algebra(cv, &at.key("codomain"))?,
        None if kind == MapKind::State => MatrixStarAlgebra::scalars(),
        None => domain.clone(),
    };
    let matrix = decode_matrix(field(obj, "matrix", at)?, &at.key("matrix"))?;
    at.wrap(PositiveMap::new(domain, codomain, matrix, kind))
}

pub fn encode_map(m: &PositiveMap) -> Value {
    json!({
        "kind": m.kind().as_str(),
        "domain": encode_algebra(m.domain()),
        "codomain": encode_algebra(m.codomain()),
        "matrix": encode_matrix(m.matrix()),
    })
}

fn decode_action(v: &Value, at: &Pointer) -> Result<LeftAction> {
    let obj = object(v, at)?;
    let algebra = decode_algebra(field(obj, "algebra", at)?, &at.key("algebra"))?;
    let images = decode_matrices(field(obj, "images", at)?, &at.key("images"))?;
    at.wrap(LeftAction::new(algebra, images))
}

fn encode_action(a: &LeftAction) -> Value {
    json!({
        "algebra": encode_algebra(a.algebra()),
        "images": a.images().iter().map(encode_matrix).collect::<Vec<_>>(),
    })
}

/// `{"base", "gram": [[block, …], …], "left_action", "base_action"?,
/// "distinguished": {"name": [coeff, …]}}`.
pub fn decode_module(v: &Value, at: &Pointer) -> Result<HilbertModule> {
    let obj = object(v, at)?;
    let base = decode_algebra(field(obj, "base", at)?, &at.key("base"))?;
    let gram_at = at.key("gram");
    let rows = array(field(obj, "gram", at)?, &gram_at)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let blocks = decode_matrices(row, &gram_at.index(i))?;
        if blocks.len() != rows.len() {
            return Err(gram_at.index(i).error(format!(
                "row has {} blocks, expected {}",
                blocks.len(),
                rows.len()
            )));
        }
        entries.push(blocks);
    }
    if entries.is_empty() {
        return Err(gram_at.error("module has no generators"));
    }
    let mut module = gram_at.wrap(HilbertModule::from_entries(base, &entries))?;
    for (key, base_action) in [("left_action", false), ("base_action", true)] {
        match obj.get(key) {
            None | Some(Value::Null) => {}
            Some(a) => {
                let action = decode_action(a, &at.key(key))?;
                module = at.key(key).wrap(if base_action {
                    module.with_base_action(action)
                } else {
                    module.with_left_action(action)
                })?;
            }
        }
    }
    if let Some(d) = obj.get("distinguished") {
        let d_at = at.key("distinguished");
        for (name, coeffs) in object(d, &d_at)? {
            let coeffs = decode_matrices(coeffs, &d_at.key(name))?;
            let x = d_at.key(name).wrap(module.vector(&coeffs))?;
            module = d_at.key(name).wrap(module.with_vector(name, x))?;
        }
    }
    Ok(module)
}

pub fn encode_module(m: &HilbertModule) -> Value {
    let gram: Vec<Value> = (0..m.gens())
        .map(|i| Value::Array((0..m.gens()).map(|j| encode_matrix(&m.gram_entry(i, j))).collect()))
        .collect();
    let distinguished: Map<String, Value> = m
        .distinguished()
        .iter()
        .map(|(name, x)| {
            let coeffs: Vec<Value> = (0..m.gens()).map(|i| encode_matrix(&m.coefficient(x, i))).collect();
            (name.clone(), Value::Array(coeffs))
        })
        .collect();
    json!({
        "base": encode_algebra(m.base()),
        "gram": gram,
        "left_action": m.left_action().map(encode_action),
        "base_action": m.base_action().map(encode_action),
        "distinguished": distinguished,
    })
}

pub fn decode_word(v: &Value, at: &Pointer) -> Result<AlternatingWord> {
    let obj = object(v, at)?;
    let l_at = at.key("letters");
    let letters = array(field(obj, "letters", at)?, &l_at)?;
    let mut word = AlternatingWord::new();
    for (i, letter) in letters.iter().enumerate() {
        let at_i = l_at.index(i);
        let lo = object(letter, &at_i)?;
        let leg_at = at_i.key("leg");
        let leg = field(lo, "leg", &at_i)?
            .as_u64()
            .and_then(Leg::from_number)
            .ok_or_else(|| leg_at.error("leg must be 1 or 2"))?;
        let element = decode_matrix(field(lo, "element", &at_i)?, &at_i.key("element"))?;
        word.letters.push(Letter { leg, element });
    }
    Ok(word)
}

pub fn encode_word(w: &AlternatingWord) -> Value {
    json!({
        "letters": w.letters.iter().map(|l| json!({
            "leg": l.leg.number(),
            "element": encode_matrix(&l.element),
        })).collect::<Vec<_>>(),
    })
}

/// A bare array of words or `{"words": [...]}`.
pub fn decode_words(v: &Value, at: &Pointer) -> Result<Vec<AlternatingWord>> {
    let (list, at) = match v {
        Value::Object(obj) => (field(obj, "words", at)?, at.key("words")),
        other => (other, at.clone()),
    };
    array(list, &at)?
        .iter()
        .enumerate()
        .map(|(i, w)| decode_word(w, &at.index(i)))
        .collect()
}

/// Named constructions of a joint distribution from two marginals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    Tensor,
    Monotone,
    ConditionalMonotone,
    ConditionalTensor,
}

impl Construction {
    pub fn as_str(self) -> &'static str {
        match self {
            Construction::Tensor => "tensor",
            Construction::Monotone => "monotone",
            Construction::ConditionalMonotone => "conditional-monotone",
            Construction::ConditionalTensor => "conditional-tensor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Construction::Tensor,
            Construction::Monotone,
            Construction::ConditionalMonotone,
            Construction::ConditionalTensor,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerSpec {
    pub max_word_length: Option<usize>,
    pub trials: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct IndependenceScenario {
    pub construction: Construction,
    pub spaces: [PositiveMap; 2],
    pub words: Vec<AlternatingWord>,
    pub sampler: Option<SamplerSpec>,
}

#[derive(Clone, Debug)]
pub enum DilationSource {
    CpMap(PositiveMap),
    Stochastic(Vec<Vec<f64>>),
    WhiteNoise { base: MatrixStarAlgebra, rank: usize },
}

/// Checks a dilation scenario may request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DilationCheck {
    Recovery,
    Coherence,
    Endomorphisms,
    Increments,
    Moments,
    Shift,
}

impl DilationCheck {
    pub const ALL: [DilationCheck; 6] = [
        DilationCheck::Recovery,
        DilationCheck::Coherence,
        DilationCheck::Endomorphisms,
        DilationCheck::Increments,
        DilationCheck::Moments,
        DilationCheck::Shift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DilationCheck::Recovery => "recovery",
            DilationCheck::Coherence => "coherence",
            DilationCheck::Endomorphisms => "endomorphisms",
            DilationCheck::Increments => "increments",
            DilationCheck::Moments => "moments",
            DilationCheck::Shift => "shift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Clone, Debug)]
pub struct DilationSpec {
    pub source: DilationSource,
    pub horizon: Option<usize>,
    /// Empty means every applicable check.
    pub checks: Vec<DilationCheck>,
}

#[derive(Clone, Debug)]
pub enum Scenario {
    Independence(IndependenceScenario),
    Dilation(DilationSpec),
}

pub fn decode_scenario(v: &Value) -> Result<Scenario> {
    let at = Pointer::root();
    let obj = object(v, &at)?;
    if obj.contains_key("construction") {
        return decode_independence(obj, &at).map(Scenario::Independence);
    }
    let sources: Vec<&str> = ["cp_map", "stochastic", "white_noise_fiber"]
        .into_iter()
        .filter(|k| obj.contains_key(*k))
        .collect();
    let key = match sources.as_slice() {
        [k] => *k,
        [] => {
            return Err(at.error(
                "expected \"construction\" or one of \"cp_map\", \"stochastic\", \"white_noise_fiber\"",
            ))
        }
        _ => return Err(at.error("more than one dilation source given")),
    };
    let src_at = at.key(key);
    let source = match key {
        "cp_map" => DilationSource::CpMap(decode_map(&obj[key], &src_at)?),
        "stochastic" => {
            let rows = array(&obj[key], &src_at)?;
            let mut p = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let cells = array(row, &src_at.index(i))?;
                p.push(
                    cells
                        .iter()
                        .enumerate()
                        .map(|(j, x)| number(x, &src_at.index(i).index(j)))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            DilationSource::Stochastic(p)
        }
        _ => {
            let fo = object(&obj[key], &src_at)?;
            let base = decode_algebra(field(fo, "base", &src_at)?, &src_at.key("base"))?;
            let rank = match fo.get("rank") {
                Some(r) => nonzero(count(r, &src_at.key("rank"))?, &src_at.key("rank"))?,
                None => 2,
            };
            DilationSource::WhiteNoise { base, rank }
        }
    };
    let horizon = match obj.get("horizon") {
        Some(h) => Some(nonzero(count(h, &at.key("horizon"))?, &at.key("horizon"))?),
        None => None,
    };
    let mut checks = Vec::new();
    if let Some(cs) = obj.get("checks") {
        let c_at = at.key("checks");
        for (i, cv) in array(cs, &c_at)?.iter().enumerate() {
            let name = cv.as_str().ok_or_else(|| c_at.index(i).error("expected a string"))?;
            let check = DilationCheck::parse(name)
                .ok_or_else(|| c_at.index(i).error(format!("unknown check \"{name}\"")))?;
            if !checks.contains(&check) {
                checks.push(check);
            }
        }
    }
    Ok(Scenario::Dilation(DilationSpec {
        source,
        horizon,
        checks,
    }))
}

fn decode_independence(obj: &Map<String, Value>, at: &Pointer) -> Result<IndependenceScenario> {
    let c_at = at.key("construction");
    let name = obj["construction"]
        .as_str()
        .ok_or_else(|| c_at.error("expected a string"))?;
    let construction =
        Construction::parse(name).ok_or_else(|| c_at.error(format!("unknown construction \"{name}\"")))?;
    let s_at = at.key("spaces");
    let spaces = array(field(obj, "spaces", at)?, &s_at)?;
    if spaces.len() != 2 {
        return Err(s_at.error(format!("expected 2 spaces, got {}", spaces.len())));
    }
    let phi1 = decode_map(&spaces[0], &s_at.index(0))?;
    let phi2 = decode_map(&spaces[1], &s_at.index(1))?;
    let words = match obj.get("words") {
        Some(w) => decode_words(w, &at.key("words"))?,
        None => Vec::new(),
    };
    let sampler = match obj.get("sampler") {
        None | Some(Value::Null) => None,
        Some(sv) => {
            let sp = at.key("sampler");
            let so = object(sv, &sp)?;
            let get = |k: &str| -> Result<Option<usize>> {
                so.get(k)
                    .map(|x| nonzero(count(x, &sp.key(k))?, &sp.key(k)))
                    .transpose()
            };
            Some(SamplerSpec {
                max_word_length: get("max_word_length")?,
                trials: get("trials")?,
            })
        }
    };
    Ok(IndependenceScenario {
        construction,
        spaces: [phi1, phi2],
        words,
        sampler,
    })
}
