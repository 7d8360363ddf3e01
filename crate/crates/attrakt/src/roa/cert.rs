//! Certificate file format: structured JSON with polynomials as arrays of
//! `{ "exponents": [...], "coeff": c }` in canonical (graded-lex) term
//! order. Round trips are bit-exact for f64 coefficients.

use serde_json::{json, Map, Value};

use crate::linalg::SymMatrix;
use crate::parse::RunConfig;
use crate::poly::{Monomial, Polynomial};

use super::{
    CertPoly, CondCert, ContainmentLink, EraCertificate, GramCert, PieceMultipliers, SetFn,
};

pub const FORMAT_NAME: &str = "attrakt-certificate";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
#[error("certificate format error: {0}")]
pub struct CertError(String);

fn bad(msg: impl Into<String>) -> CertError {
    CertError(msg.into())
}

fn poly_to_value(p: &Polynomial<f64>) -> Value {
    let terms: Vec<Value> = p
        .terms()
        .map(|(m, c)| json!({ "exponents": m.exps(), "coeff": c }))
        .collect();
    json!({ "nvars": p.nvars(), "terms": terms })
}

fn poly_from_value(v: &Value) -> Result<Polynomial<f64>, CertError> {
    let nvars = v
        .get("nvars")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad("polynomial missing nvars"))? as usize;
    let terms = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("polynomial missing terms"))?;
    let mut p = Polynomial::zero(nvars);
    for t in terms {
        let exps: Vec<u32> = t
            .get("exponents")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("term missing exponents"))?
            .iter()
            .map(|e| e.as_u64().map(|x| x as u32).ok_or_else(|| bad("bad exponent")))
            .collect::<Result<_, _>>()?;
        if exps.len() != nvars {
            return Err(bad("exponent length mismatch"));
        }
        let coeff = t
            .get("coeff")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("term missing coeff"))?;
        p.add_term(Monomial::new(exps), coeff);
    }
    Ok(p)
}

fn gram_to_value(g: &GramCert<f64>) -> Value {
    let basis: Vec<Value> = g.basis.iter().map(|m| json!(m.exps())).collect();
    let n = g.q.dim();
    let rows: Vec<Value> = (0..n)
        .map(|i| Value::Array((0..n).map(|j| json!(g.q.get(i, j))).collect()))
        .collect();
    json!({ "basis": basis, "q": rows })
}

fn gram_from_value(v: &Value) -> Result<GramCert<f64>, CertError> {
    let basis: Vec<Monomial> = v
        .get("basis")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("gram missing basis"))?
        .iter()
        .map(|b| {
            b.as_array()
                .ok_or_else(|| bad("bad basis monomial"))
                .and_then(|arr| {
                    arr.iter()
                        .map(|e| e.as_u64().map(|x| x as u32).ok_or_else(|| bad("bad exponent")))
                        .collect::<Result<Vec<u32>, _>>()
                })
                .map(Monomial::new)
        })
        .collect::<Result<_, _>>()?;
    let rows = v
        .get("q")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("gram missing q"))?;
    let n = rows.len();
    if basis.len() != n {
        return Err(bad("gram basis/matrix size mismatch"));
    }
    let mut q = SymMatrix::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| bad("bad gram row"))?;
        if row.len() != n {
            return Err(bad("ragged gram row"));
        }
        for (j, e) in row.iter().enumerate().take(i + 1) {
            q.set(i, j, e.as_f64().ok_or_else(|| bad("bad gram entry"))?);
        }
    }
    Ok(GramCert { basis, q })
}

fn cert_poly_to_value(cp: &CertPoly<f64>) -> Value {
    let mut m = Map::new();
    m.insert("poly".into(), poly_to_value(&cp.poly));
    if let Some(g) = &cp.gram {
        m.insert("gram".into(), gram_to_value(g));
    }
    Value::Object(m)
}

fn cert_poly_from_value(v: &Value) -> Result<CertPoly<f64>, CertError> {
    let poly = poly_from_value(v.get("poly").ok_or_else(|| bad("missing poly"))?)?;
    let gram = match v.get("gram") {
        Some(g) => Some(gram_from_value(g)?),
        None => None,
    };
    Ok(CertPoly { poly, gram })
}

fn cond_to_value(c: &CondCert<f64>) -> Value {
    json!({
        "name": c.name,
        "grams": c.grams.iter().map(gram_to_value).collect::<Vec<_>>(),
    })
}

fn cond_from_value(v: &Value) -> Result<CondCert<f64>, CertError> {
    let name = v
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("condition missing name"))?
        .to_string();
    let grams = v
        .get("grams")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("condition missing grams"))?
        .iter()
        .map(gram_from_value)
        .collect::<Result<_, _>>()?;
    Ok(CondCert { name, grams })
}

fn mults_to_value(m: &PieceMultipliers<f64>) -> Value {
    let mut obj = Map::new();
    obj.insert("p".into(), poly_to_value(&m.p));
    obj.insert("m0".into(), cert_poly_to_value(&m.m0));
    obj.insert("m1".into(), cert_poly_to_value(&m.m1));
    if let Some(m2) = &m.m2 {
        obj.insert("m2".into(), cert_poly_to_value(m2));
    }
    let s_list = |list: &[CertPoly<f64>]| -> Value {
        Value::Array(list.iter().map(cert_poly_to_value).collect())
    };
    if !m.s_invariance.is_empty()
        || !m.s_positivity.is_empty()
        || !m.s_decrease.is_empty()
        || !m.s_rational.is_empty()
    {
        obj.insert("s_invariance".into(), s_list(&m.s_invariance));
        obj.insert("s_positivity".into(), s_list(&m.s_positivity));
        obj.insert("s_decrease".into(), s_list(&m.s_decrease));
        obj.insert("s_rational".into(), s_list(&m.s_rational));
    }
    Value::Object(obj)
}

fn mults_from_value(v: &Value) -> Result<PieceMultipliers<f64>, CertError> {
    let s_list = |key: &str| -> Result<Vec<CertPoly<f64>>, CertError> {
        match v.get(key) {
            None => Ok(Vec::new()),
            Some(arr) => arr
                .as_array()
                .ok_or_else(|| bad("bad multiplier list"))?
                .iter()
                .map(cert_poly_from_value)
                .collect(),
        }
    };
    Ok(PieceMultipliers {
        p: poly_from_value(v.get("p").ok_or_else(|| bad("missing p"))?)?,
        m0: cert_poly_from_value(v.get("m0").ok_or_else(|| bad("missing m0"))?)?,
        m1: cert_poly_from_value(v.get("m1").ok_or_else(|| bad("missing m1"))?)?,
        m2: match v.get("m2") {
            Some(m2) => Some(cert_poly_from_value(m2)?),
            None => None,
        },
        s_invariance: s_list("s_invariance")?,
        s_positivity: s_list("s_positivity")?,
        s_decrease: s_list("s_decrease")?,
        s_rational: s_list("s_rational")?,
    })
}

fn config_to_value(cfg: &RunConfig<f64>) -> Value {
    let overrides: Map<String, Value> = cfg
        .deg_overrides
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    json!({
        "deg_vn": cfg.deg_vn,
        "deg_r": cfg.deg_r,
        "deg_overrides": overrides,
        "gamma_lo": cfg.gamma_lo,
        "gamma_hi": cfg.gamma_hi,
        "bisect_tol": cfg.bisect_tol,
        "max_outer_iters": cfg.max_outer_iters,
        "eps_margin": cfg.eps_margin,
        "kappa": cfg.kappa,
        "k_compact": cfg.k_compact,
        "tol_feas": cfg.tol_feas,
        "tol_gap": cfg.tol_gap,
        "max_iters": cfg.max_iters,
        "seed": cfg.seed,
    })
}

fn config_from_value(v: &Value) -> Result<RunConfig<f64>, CertError> {
    let mut cfg = RunConfig::<f64>::default();
    let get_u = |key: &str| v.get(key).and_then(Value::as_u64);
    let get_f = |key: &str| v.get(key).and_then(Value::as_f64);
    if let Some(x) = get_u("deg_vn") {
        cfg.deg_vn = x as usize;
    }
    if let Some(x) = get_u("deg_r") {
        cfg.deg_r = x as usize;
    }
    if let Some(map) = v.get("deg_overrides").and_then(Value::as_object) {
        for (k, val) in map {
            if let Some(d) = val.as_u64() {
                cfg.deg_overrides.insert(k.clone(), d as usize);
            }
        }
    }
    if let Some(x) = get_f("gamma_lo") {
        cfg.gamma_lo = x;
    }
    if let Some(x) = get_f("gamma_hi") {
        cfg.gamma_hi = x;
    }
    if let Some(x) = get_f("bisect_tol") {
        cfg.bisect_tol = x;
    }
    if let Some(x) = get_u("max_outer_iters") {
        cfg.max_outer_iters = x as usize;
    }
    if let Some(x) = get_f("eps_margin") {
        cfg.eps_margin = x;
    }
    if let Some(x) = get_f("kappa") {
        cfg.kappa = x;
    }
    if let Some(x) = get_u("k_compact") {
        cfg.k_compact = x as usize;
    }
    if let Some(x) = get_f("tol_feas") {
        cfg.tol_feas = x;
    }
    if let Some(x) = get_f("tol_gap") {
        cfg.tol_gap = x;
    }
    if let Some(x) = get_u("max_iters") {
        cfg.max_iters = x as usize;
    }
    if let Some(x) = get_u("seed") {
        cfg.seed = x;
    }
    Ok(cfg)
}

fn link_to_value(l: &ContainmentLink<f64>) -> Value {
    json!({
        "prev_r": poly_to_value(&l.prev_r),
        "prev_gamma": l.prev_gamma,
        "r": poly_to_value(&l.r),
        "gamma": l.gamma,
        "m3": cert_poly_to_value(&l.m3),
        "cond": cond_to_value(&l.cond),
    })
}

fn link_from_value(v: &Value) -> Result<ContainmentLink<f64>, CertError> {
    Ok(ContainmentLink {
        prev_r: poly_from_value(v.get("prev_r").ok_or_else(|| bad("link missing prev_r"))?)?,
        prev_gamma: v
            .get("prev_gamma")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("link missing prev_gamma"))?,
        r: poly_from_value(v.get("r").ok_or_else(|| bad("link missing r"))?)?,
        gamma: v
            .get("gamma")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("link missing gamma"))?,
        m3: cert_poly_from_value(v.get("m3").ok_or_else(|| bad("link missing m3"))?)?,
        cond: cond_from_value(v.get("cond").ok_or_else(|| bad("link missing cond"))?)?,
    })
}

/// Serializes a certificate to its JSON document.
pub fn to_json(cert: &EraCertificate<f64>) -> Value {
    let mut obj = Map::new();
    obj.insert("format".into(), json!(FORMAT_NAME));
    obj.insert("version".into(), json!(FORMAT_VERSION));
    obj.insert("nvars".into(), json!(cert.nvars()));
    obj.insert("var_names".into(), json!(cert.var_names));
    match &cert.set {
        SetFn::Single(r) => {
            obj.insert("r".into(), poly_to_value(r));
        }
        SetFn::Max(ps) => {
            obj.insert(
                "pieces".into(),
                Value::Array(ps.iter().map(poly_to_value).collect()),
            );
        }
    }
    obj.insert("gamma".into(), json!(cert.gamma));
    obj.insert("v_n".into(), poly_to_value(&cert.v_n));
    if cert.mults.len() == 1 {
        let m = &cert.mults[0];
        obj.insert("p".into(), poly_to_value(&m.p));
        obj.insert("m0".into(), cert_poly_to_value(&m.m0));
        obj.insert("m1".into(), cert_poly_to_value(&m.m1));
        if let Some(m2) = &m.m2 {
            obj.insert("m2".into(), cert_poly_to_value(m2));
        }
    } else {
        obj.insert(
            "multipliers".into(),
            Value::Array(cert.mults.iter().map(mults_to_value).collect()),
        );
    }
    obj.insert(
        "conditions".into(),
        Value::Array(cert.conditions.iter().map(cond_to_value).collect()),
    );
    obj.insert(
        "m3_chain".into(),
        Value::Array(cert.m3_chain.iter().map(link_to_value).collect()),
    );
    obj.insert("eps_margin".into(), json!(cert.eps_margin));
    obj.insert("iteration".into(), json!(cert.iteration));
    obj.insert("gamma_trace".into(), json!(cert.gamma_trace));
    obj.insert("config".into(), config_to_value(&cert.config));
    Value::Object(obj)
}

/// Parses a certificate from its JSON document.
pub fn from_json(v: &Value) -> Result<EraCertificate<f64>, CertError> {
    if v.get("format").and_then(Value::as_str) != Some(FORMAT_NAME) {
        return Err(bad("not an attrakt certificate"));
    }
    let var_names: Vec<String> = v
        .get("var_names")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing var_names"))?
        .iter()
        .map(|s| s.as_str().map(String::from).ok_or_else(|| bad("bad var name")))
        .collect::<Result<_, _>>()?;
    let set = if let Some(r) = v.get("r") {
        SetFn::Single(poly_from_value(r)?)
    } else if let Some(pieces) = v.get("pieces").and_then(Value::as_array) {
        SetFn::Max(pieces.iter().map(poly_from_value).collect::<Result<_, _>>()?)
    } else {
        return Err(bad("missing r or pieces"));
    };
    let gamma = v
        .get("gamma")
        .and_then(Value::as_f64)
        .ok_or_else(|| bad("missing gamma"))?;
    let v_n = poly_from_value(v.get("v_n").ok_or_else(|| bad("missing v_n"))?)?;
    let mults = if let Some(arr) = v.get("multipliers").and_then(Value::as_array) {
        arr.iter().map(mults_from_value).collect::<Result<_, _>>()?
    } else {
        vec![PieceMultipliers {
            p: poly_from_value(v.get("p").ok_or_else(|| bad("missing p"))?)?,
            m0: cert_poly_from_value(v.get("m0").ok_or_else(|| bad("missing m0"))?)?,
            m1: cert_poly_from_value(v.get("m1").ok_or_else(|| bad("missing m1"))?)?,
            m2: match v.get("m2") {
                Some(m2) => Some(cert_poly_from_value(m2)?),
                None => None,
            },
            s_invariance: Vec::new(),
            s_positivity: Vec::new(),
            s_decrease: Vec::new(),
            s_rational: Vec::new(),
        }]
    };
    let conditions = v
        .get("conditions")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing conditions"))?
        .iter()
        .map(cond_from_value)
        .collect::<Result<_, _>>()?;
    let m3_chain = v
        .get("m3_chain")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing m3_chain"))?
        .iter()
        .map(link_from_value)
        .collect::<Result<_, _>>()?;
    let eps_margin = v
        .get("eps_margin")
        .and_then(Value::as_f64)
        .ok_or_else(|| bad("missing eps_margin"))?;
    let iteration = v.get("iteration").and_then(Value::as_u64).unwrap_or(0) as usize;
    let gamma_trace: Vec<f64> = v
        .get("gamma_trace")
        .and_then(Value::as_array)
        .map(|arr| arr.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default();
    let config = config_from_value(v.get("config").unwrap_or(&Value::Null))?;
    Ok(EraCertificate {
        var_names,
        set,
        gamma,
        v_n,
        mults,
        conditions,
        m3_chain,
        eps_margin,
        iteration,
        gamma_trace,
        config,
    })
}

/// Writes a certificate as pretty-printed JSON (deterministic byte output).
pub fn to_json_string(cert: &EraCertificate<f64>) -> String {
    serde_json::to_string_pretty(&to_json(cert)).expect("serialization cannot fail")
}

/// Reads a certificate from a JSON string.
pub fn from_json_str(s: &str) -> Result<EraCertificate<f64>, CertError> {
    let v: Value = serde_json::from_str(s).map_err(|e| bad(format!("bad JSON: {}", e)))?;
    from_json(&v)
}
