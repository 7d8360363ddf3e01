//! Parsers for polynomial expressions, system definition files, and run
//! configuration files.
//!
//! Expression grammar (recursive descent):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' nat)?
//! base   := number | ident | '(' expr ')' | '-' factor
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`. Numbers are
//! decimal or scientific literals; exponents must be nonnegative integer
//! literals. `#` starts a comment in file formats.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::poly::Polynomial;
use crate::scalar::{real, Scalar};

/// Structured parse failure with source position (1-based line/column).
#[derive(Debug, Clone, Error)]
#[error("line {line}, col {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("exponent must be a nonnegative integer literal")]
    BadExponent,
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("missing equation for variable `{0}`")]
    MissingEquation(String),
    #[error("vector field does not vanish at the origin: f_{var}(0) = {value}")]
    NotEquilibrium { var: String, value: f64 },
    #[error("missing `vars:` declaration")]
    MissingVars,
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

fn err(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, col, kind }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, is_int: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn tokenize(src: &str, line: usize, col_offset: usize) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let col = col_offset + i + 1;
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '+' => {
                toks.push(Token { tok: Tok::Plus, col });
                i += 1;
            }
            '-' => {
                toks.push(Token { tok: Tok::Minus, col });
                i += 1;
            }
            '*' => {
                toks.push(Token { tok: Tok::Star, col });
                i += 1;
            }
            '^' => {
                toks.push(Token { tok: Tok::Caret, col });
                i += 1;
            }
            '(' => {
                toks.push(Token { tok: Tok::LParen, col });
                i += 1;
            }
            ')' => {
                toks.push(Token { tok: Tok::RParen, col });
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                let mut saw_dot = false;
                let mut saw_exp = false;
                while i < bytes.len() {
                    let d = bytes[i];
                    if d.is_ascii_digit() {
                        i += 1;
                    } else if d == '.' && !saw_dot && !saw_exp {
                        saw_dot = true;
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && !saw_exp
                        && i + 1 < bytes.len()
                        && (bytes[i + 1].is_ascii_digit()
                            || ((bytes[i + 1] == '+' || bytes[i + 1] == '-')
                                && i + 2 < bytes.len()
                                && bytes[i + 2].is_ascii_digit()))
                    {
                        saw_exp = true;
                        i += 1;
                        if bytes[i] == '+' || bytes[i] == '-' {
                            i += 1;
                        }
                    } else {
                        break;
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| {
                    err(line, col, ParseErrorKind::Syntax(format!("bad number `{}`", text)))
                })?;
                toks.push(Token {
                    tok: Tok::Num { value, is_int: !saw_dot && !saw_exp },
                    col,
                });
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                toks.push(Token { tok: Tok::Ident(text), col });
            }
            _ => {
                return Err(err(
                    line,
                    col,
                    ParseErrorKind::Syntax(format!("unexpected character `{}`", c)),
                ))
            }
        }
    }
    Ok(toks)
}

struct ExprParser<'a, T: Scalar> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
    vars: &'a BTreeMap<String, usize>,
    nvars: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar> ExprParser<'a, T> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn cur_col(&self) -> usize {
        self.peek().map(|t| t.col).unwrap_or(self.end_col)
    }

    fn syntax(&self, msg: &str) -> ParseError {
        err(self.line, self.cur_col(), ParseErrorKind::Syntax(msg.to_string()))
    }

    fn expr(&mut self) -> Result<Polynomial<T>, ParseError> {
        let mut acc = self.term()?;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Plus => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial<T>, ParseError> {
        let mut acc = self.factor()?;
        while let Some(t) = self.peek() {
            if t.tok == Tok::Star {
                self.pos += 1;
                acc = &acc * &self.factor()?;
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial<T>, ParseError> {
        let base = self.base()?;
        if let Some(t) = self.peek() {
            if t.tok == Tok::Caret {
                self.pos += 1;
                let t = self
                    .peek()
                    .ok_or_else(|| self.syntax("expected exponent after `^`"))?;
                match &t.tok {
                    Tok::Num { value, is_int } if *is_int && *value >= 0.0 => {
                        let k = *value as usize;
                        self.pos += 1;
                        return Ok(base.pow(k));
                    }
                    _ => return Err(err(self.line, t.col, ParseErrorKind::BadExponent)),
                }
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Polynomial<T>, ParseError> {
        let t = self
            .peek()
            .cloned()
            .ok_or_else(|| self.syntax("unexpected end of expression"))?;
        match t.tok {
            Tok::Num { value, .. } => {
                self.pos += 1;
                Ok(Polynomial::constant(self.nvars, real::<T>(value)))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match self.vars.get(&name) {
                    Some(&i) => Ok(Polynomial::variable(self.nvars, i)),
                    None => Err(err(self.line, t.col, ParseErrorKind::UnknownIdentifier(name))),
                }
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(tok) if tok.tok == Tok::RParen => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.syntax("expected `)`")),
                }
            }
            Tok::Minus => {
                self.pos += 1;
                Ok(-&self.factor()?)
            }
            _ => Err(self.syntax("expected number, identifier, `(` or `-`")),
        }
    }
}

fn parse_expr_tokens<T: Scalar>(
    toks: &[Token],
    line: usize,
    end_col: usize,
    vars: &BTreeMap<String, usize>,
    nvars: usize,
) -> Result<Polynomial<T>, ParseError> {
    let mut p = ExprParser::<T> {
        toks,
        pos: 0,
        line,
        end_col,
        vars,
        nvars,
        _marker: std::marker::PhantomData,
    };
    let poly = p.expr()?;
    if p.pos != toks.len() {
        return Err(p.syntax("trailing tokens after expression"));
    }
    Ok(poly)
}

fn name_map(var_names: &[String]) -> BTreeMap<String, usize> {
    var_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect()
}

/// Parses a single polynomial expression over the given variables.
pub fn parse_polynomial<T: Scalar>(
    text: &str,
    var_names: &[String],
) -> Result<Polynomial<T>, ParseError> {
    let vars = name_map(var_names);
    let toks = tokenize(text, 1, 0)?;
    if toks.is_empty() {
        return Err(err(1, 1, ParseErrorKind::Syntax("empty expression".into())));
    }
    parse_expr_tokens(&toks, 1, text.chars().count() + 1, &vars, var_names.len())
}

/// Polynomial vector field `xdot = f(x)` with the equilibrium at the origin.
#[derive(Debug, Clone)]
pub struct PolySystem<T: Scalar> {
    pub var_names: Vec<String>,
    pub f: Vec<Polynomial<T>>,
}

impl<T: Scalar> PolySystem<T> {
    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    /// Vector field value at a point.
    pub fn eval(&self, x: &[T]) -> Vec<T> {
        self.f.iter().map(|fi| fi.evaluate(x)).collect()
    }

    pub fn max_degree(&self) -> i32 {
        self.f.iter().map(|fi| fi.degree()).max().unwrap_or(-1)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses a system definition file.
///
/// ```text
/// vars: x1 x2
/// dot x1 = -0.42*x1 - 1.05*x2 - 2.3*x1^2 - 0.5*x1*x2 - x1^3
/// dot x2 = 1.98*x1 + x1*x2
/// ```
pub fn parse_system<T: Scalar>(src: &str) -> Result<PolySystem<T>, ParseError> {
    let mut var_names: Option<Vec<String>> = None;
    let mut equations: BTreeMap<usize, Polynomial<T>> = BTreeMap::new();

    for (lineno0, raw) in src.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("vars:") {
            if var_names.is_some() {
                return Err(err(
                    lineno,
                    1,
                    ParseErrorKind::Syntax("duplicate `vars:` declaration".into()),
                ));
            }
            let mut names = Vec::new();
            for name in rest.split_whitespace() {
                if !name.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false)
                    || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    return Err(err(
                        lineno,
                        1,
                        ParseErrorKind::Syntax(format!("bad variable name `{}`", name)),
                    ));
                }
                if names.contains(&name.to_string()) {
                    return Err(err(lineno, 1, ParseErrorKind::DuplicateVariable(name.into())));
                }
                names.push(name.to_string());
            }
            if names.is_empty() {
                return Err(err(lineno, 1, ParseErrorKind::Syntax("empty variable list".into())));
            }
            var_names = Some(names);
        } else if let Some(rest) = trimmed.strip_prefix("dot") {
            let names = var_names
                .as_ref()
                .ok_or_else(|| err(lineno, 1, ParseErrorKind::MissingVars))?;
            let vars = name_map(names);
            let (lhs, rhs) = rest.split_once('=').ok_or_else(|| {
                err(lineno, 1, ParseErrorKind::Syntax("expected `dot <var> = <expr>`".into()))
            })?;
            let var = lhs.trim();
            let idx = *vars
                .get(var)
                .ok_or_else(|| err(lineno, 1, ParseErrorKind::UnknownIdentifier(var.into())))?;
            if equations.contains_key(&idx) {
                return Err(err(lineno, 1, ParseErrorKind::DuplicateVariable(var.into())));
            }
            let col_offset = raw.len() - rhs.len();
            let toks = tokenize(rhs, lineno, col_offset)?;
            if toks.is_empty() {
                return Err(err(lineno, col_offset + 1, ParseErrorKind::Syntax("empty right-hand side".into())));
            }
            let poly = parse_expr_tokens::<T>(&toks, lineno, raw.len() + 1, &vars, names.len())?;
            equations.insert(idx, poly);
        } else {
            return Err(err(
                lineno,
                1,
                ParseErrorKind::Syntax(format!("unrecognized line `{}`", trimmed)),
            ));
        }
    }

    let var_names = var_names.ok_or_else(|| err(1, 1, ParseErrorKind::MissingVars))?;
    let mut f = Vec::new();
    for (i, name) in var_names.iter().enumerate() {
        match equations.remove(&i) {
            Some(p) => f.push(p),
            None => return Err(err(1, 1, ParseErrorKind::MissingEquation(name.clone()))),
        }
    }

    // f(0) = 0 is structural: the parsed constant term must vanish.
    let origin = vec![T::zero(); var_names.len()];
    for (i, fi) in f.iter().enumerate() {
        let v = fi.evaluate(&origin);
        if v.abs() > real::<T>(1e-12) {
            return Err(err(
                1,
                1,
                ParseErrorKind::NotEquilibrium {
                    var: var_names[i].clone(),
                    value: v.to_f64().unwrap_or(f64::NAN),
                },
            ));
        }
    }

    Ok(PolySystem { var_names, f })
}

/// Parses a pieces file: one polynomial expression per non-comment line.
pub fn parse_pieces<T: Scalar>(
    src: &str,
    var_names: &[String],
) -> Result<Vec<Polynomial<T>>, ParseError> {
    let vars = name_map(var_names);
    let mut pieces = Vec::new();
    for (lineno0, raw) in src.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let toks = tokenize(line, lineno, 0)?;
        pieces.push(parse_expr_tokens::<T>(
            &toks,
            lineno,
            raw.len() + 1,
            &vars,
            var_names.len(),
        )?);
    }
    if pieces.is_empty() {
        return Err(err(1, 1, ParseErrorKind::Syntax("no pieces defined".into())));
    }
    Ok(pieces)
}

/// Run configuration: search degrees, gamma bracket, margins, solver knobs.
#[derive(Debug, Clone)]
pub struct RunConfig<T: Scalar> {
    pub deg_vn: usize,
    pub deg_r: usize,
    /// Per-multiplier degree overrides, keyed by `p`, `m0`, `m1`, `m2`, `m3`, `s`.
    pub deg_overrides: BTreeMap<String, usize>,
    pub gamma_lo: T,
    pub gamma_hi: T,
    pub bisect_tol: T,
    pub max_outer_iters: usize,
    pub eps_margin: T,
    pub kappa: T,
    /// Compactness exponent k in `R >= c + kappa * |x|^(2k)`; 0 means deg_r / 2.
    pub k_compact: usize,
    pub tol_feas: T,
    pub tol_gap: T,
    pub max_iters: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for RunConfig<T> {
    fn default() -> Self {
        RunConfig {
            deg_vn: 4,
            deg_r: 4,
            deg_overrides: BTreeMap::new(),
            gamma_lo: real(1e-4),
            gamma_hi: real(100.0),
            bisect_tol: real(2e-3),
            max_outer_iters: 10,
            eps_margin: real(1e-6),
            kappa: real(1e-3),
            k_compact: 0,
            tol_feas: real(1e-8),
            tol_gap: real(1e-8),
            max_iters: 100,
            seed: 0,
        }
    }
}

impl<T: Scalar> RunConfig<T> {
    /// Effective compactness exponent.
    pub fn compact_k(&self) -> usize {
        if self.k_compact > 0 {
            self.k_compact
        } else {
            (self.deg_r / 2).max(1)
        }
    }

    pub fn validate(&self) -> Result<(), ParseError> {
        let bad = |key: &str, reason: &str| {
            Err(err(
                1,
                1,
                ParseErrorKind::InvalidValue { key: key.into(), reason: reason.into() },
            ))
        };
        if self.deg_vn < 2 || self.deg_vn % 2 != 0 {
            return bad("deg_vn", "must be an even natural >= 2");
        }
        if self.deg_r < 2 || self.deg_r % 2 != 0 {
            return bad("deg_r", "must be an even natural >= 2");
        }
        if !(self.gamma_lo > T::zero()) {
            return bad("gamma_lo", "must be positive");
        }
        if !(self.gamma_hi > self.gamma_lo) {
            return bad("gamma_hi", "must exceed gamma_lo");
        }
        if !(self.bisect_tol > T::zero()) {
            return bad("bisect_tol", "must be positive");
        }
        if !(self.eps_margin > T::zero()) {
            return bad("eps_margin", "must be positive");
        }
        if self.kappa < T::zero() {
            return bad("kappa", "must be nonnegative");
        }
        Ok(())
    }
}

/// Parses a flat `key = value` configuration file. Unknown keys are an error.
pub fn parse_config<T: Scalar>(src: &str) -> Result<RunConfig<T>, ParseError> {
    let mut cfg = RunConfig::<T>::default();
    for (lineno0, raw) in src.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            err(lineno, 1, ParseErrorKind::Syntax("expected `key = value`".into()))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad_value = |reason: &str| {
            err(
                lineno,
                1,
                ParseErrorKind::InvalidValue { key: key.to_string(), reason: reason.to_string() },
            )
        };
        let as_usize = || value.parse::<usize>().map_err(|_| bad_value("expected a natural number"));
        let as_u64 = || value.parse::<u64>().map_err(|_| bad_value("expected a natural number"));
        let as_real = || {
            value
                .parse::<f64>()
                .map(real::<T>)
                .map_err(|_| bad_value("expected a number"))
        };
        match key {
            "deg_vn" => cfg.deg_vn = as_usize()?,
            "deg_r" => cfg.deg_r = as_usize()?,
            "deg_p" | "deg_m0" | "deg_m1" | "deg_m2" | "deg_m3" | "deg_s" => {
                cfg.deg_overrides
                    .insert(key.trim_start_matches("deg_").to_string(), as_usize()?);
            }
            "gamma_lo" => cfg.gamma_lo = as_real()?,
            "gamma_hi" => cfg.gamma_hi = as_real()?,
            "bisect_tol" => cfg.bisect_tol = as_real()?,
            "max_outer_iters" => cfg.max_outer_iters = as_usize()?,
            "eps_margin" => cfg.eps_margin = as_real()?,
            "kappa" => cfg.kappa = as_real()?,
            "k_compact" => cfg.k_compact = as_usize()?,
            "tol_feas" => cfg.tol_feas = as_real()?,
            "tol_gap" => cfg.tol_gap = as_real()?,
            "max_iters" => cfg.max_iters = as_usize()?,
            "seed" => cfg.seed = as_u64()?,
            _ => return Err(err(lineno, 1, ParseErrorKind::UnknownKey(key.to_string()))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_expansion_of_square() {
        let p: Polynomial<f64> =
            parse_polynomial("x1^2 - 2*x1*x2 + x2^2", &names(&["x1", "x2"])).unwrap();
        assert_eq!(p.coeff(&Monomial::new(vec![2, 0])), 1.0);
        assert_eq!(p.coeff(&Monomial::new(vec![1, 1])), -2.0);
        assert_eq!(p.coeff(&Monomial::new(vec![0, 2])), 1.0);
        assert_eq!(p.num_terms(), 3);
    }

    #[test]
    fn parses_zero_literal() {
        let p: Polynomial<f64> = parse_polynomial("0", &names(&["x1"])).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn parses_negated_square_with_expansion() {
        let p: Polynomial<f64> = parse_polynomial("-(x1 - 1)^2", &names(&["x1"])).unwrap();
        assert_eq!(p.coeff(&Monomial::new(vec![2])), -1.0);
        assert_eq!(p.coeff(&Monomial::new(vec![1])), 2.0);
        assert_eq!(p.coeff(&Monomial::new(vec![0])), -1.0);
    }

    #[test]
    fn caret_binds_tighter_than_unary_minus() {
        let p: Polynomial<f64> = parse_polynomial("-x1^2", &names(&["x1"])).unwrap();
        assert_eq!(p.coeff(&Monomial::new(vec![2])), -1.0);
        let q: Polynomial<f64> = parse_polynomial("2*x1^2", &names(&["x1"])).unwrap();
        assert_eq!(q.coeff(&Monomial::new(vec![2])), 2.0);
    }

    #[test]
    fn rejects_bad_exponent_and_unknown_identifier() {
        let e = parse_polynomial::<f64>("x1^-2", &names(&["x1"])).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::BadExponent | ParseErrorKind::Syntax(_)));
        let e = parse_polynomial::<f64>("x1^2.5", &names(&["x1"])).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::BadExponent));
        let e = parse_polynomial::<f64>("x1 + y", &names(&["x1"])).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnknownIdentifier(_)));
    }

    const EX1: &str = "\
vars: x1 x2
dot x1 = -0.42*x1 - 1.05*x2 - 2.3*x1^2 - 0.5*x1*x2 - x1^3
dot x2 = 1.98*x1 + x1*x2
";

    #[test]
    fn parses_lotka_volterra_system() {
        let sys: PolySystem<f64> = parse_system(EX1).unwrap();
        assert_eq!(sys.nvars(), 2);
        let f1 = &sys.f[0];
        assert_eq!(f1.coeff(&Monomial::new(vec![1, 0])), -0.42);
        assert_eq!(f1.coeff(&Monomial::new(vec![0, 1])), -1.05);
        assert_eq!(f1.coeff(&Monomial::new(vec![2, 0])), -2.3);
        assert_eq!(f1.coeff(&Monomial::new(vec![1, 1])), -0.5);
        assert_eq!(f1.coeff(&Monomial::new(vec![3, 0])), -1.0);
        let f2 = &sys.f[1];
        assert_eq!(f2.coeff(&Monomial::new(vec![1, 0])), 1.98);
        assert_eq!(f2.coeff(&Monomial::new(vec![1, 1])), 1.0);
        assert_eq!(sys.eval(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn parses_product_form_system() {
        let src = "vars: x1 x2\ndot x1 = -x1*(1 - x1*x2)\ndot x2 = -x2\n";
        let sys: PolySystem<f64> = parse_system(src).unwrap();
        assert_eq!(sys.f[0].coeff(&Monomial::new(vec![1, 0])), -1.0);
        assert_eq!(sys.f[0].coeff(&Monomial::new(vec![2, 1])), 1.0);
        assert_eq!(sys.f[1].coeff(&Monomial::new(vec![0, 1])), -1.0);
    }

    #[test]
    fn parses_single_variable_system() {
        let sys: PolySystem<f64> = parse_system("vars: x1\ndot x1 = -x1\n").unwrap();
        assert_eq!(sys.nvars(), 1);
        assert_eq!(sys.f[0].degree(), 1);
    }

    #[test]
    fn rejects_nonzero_origin() {
        let e = parse_system::<f64>("vars: x1\ndot x1 = -x1 + 0.5\n").unwrap_err();
        match e.kind {
            ParseErrorKind::NotEquilibrium { value, .. } => assert_eq!(value, 0.5),
            other => panic!("expected NotEquilibrium, got {:?}", other),
        }
    }

    #[test]
    fn rejects_missing_equation_and_duplicates() {
        let e = parse_system::<f64>("vars: x1 x2\ndot x1 = -x1\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::MissingEquation(_)));
        let e = parse_system::<f64>("vars: x1 x1\ndot x1 = -x1\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::DuplicateVariable(_)));
        let e =
            parse_system::<f64>("vars: x1\ndot x1 = -x1\ndot x1 = -x1\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::DuplicateVariable(_)));
    }

    #[test]
    fn config_roundtrip_and_unknown_key() {
        let cfg: RunConfig<f64> =
            parse_config("deg_vn = 6\ngamma_hi = 10.0\nseed = 7\n# comment\n").unwrap();
        assert_eq!(cfg.deg_vn, 6);
        assert_eq!(cfg.gamma_hi, 10.0);
        assert_eq!(cfg.seed, 7);
        let e = parse_config::<f64>("degvn = 6\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnknownKey(_)));
        let e = parse_config::<f64>("deg_vn = 3\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidValue { .. }));
    }
}
