//! Manifold spec files.
//!
//! ```text
//! # comment
//! [manifold]
//! name = "sphere"
//! dim = 2
//! coords = "theta, phi"
//!
//! [metric]
//! g[0][0] = "1"
//! g[1][1] = "sin(theta)^2"
//!
//! [domain]
//! theta = 0.3, 2.8
//! phi = -3, 3
//! fiber = -1, 1          # every fiber coordinate; `fiber.theta = ...` for one
//!
//! [vectorfield.dphi]
//! X[1] = "1"             # omitted components are 0
//!
//! [oneform.dtheta]
//! w[0] = "1"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{Interval, ManifoldSpec, SpecBuilder, SpecError};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: SpecError },
    #[error("{0}")]
    Spec(#[from] SpecError),
}

impl LoadError {
    /// Line number the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            LoadError::Syntax { line, .. } | LoadError::AtLine { line, .. } => Some(*line),
            _ => None,
        }
    }
}

type Result<T> = std::result::Result<T, LoadError>;

pub fn load_spec(path: impl AsRef<Path>) -> Result<ManifoldSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("spec");
    parse_spec(&text, stem)
}

/// Parses spec text; `default_name` is used when `[manifold]` has no name.
pub fn parse_spec(text: &str, default_name: &str) -> Result<ManifoldSpec> {
    let raw = scan(text)?;
    build(raw, default_name)
}

#[derive(Clone, Debug, PartialEq)]
enum Section {
    Manifold,
    Metric,
    Domain,
    VectorField(String),
    OneForm(String),
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Default)]
struct Raw {
    manifold: Vec<Entry>,
    metric: Vec<Entry>,
    domain: Vec<Entry>,
    fields: Vec<(String, usize, Vec<Entry>)>,
    forms: Vec<(String, usize, Vec<Entry>)>,
}

fn syntax(line: usize, message: impl Into<String>) -> LoadError {
    LoadError::Syntax { line, message: message.into() }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (k, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..k],
            _ => {}
        }
    }
    line
}

fn unquote(line: usize, v: &str) -> Result<String> {
    let v = v.trim();
    match v.strip_prefix('"') {
        Some(rest) => match rest.strip_suffix('"') {
            Some(inner) if !inner.contains('"') => Ok(inner.to_string()),
            _ => Err(syntax(line, format!("unterminated string {v}"))),
        },
        None if v.contains('"') => Err(syntax(line, format!("stray quote in {v}"))),
        None => Ok(v.to_string()),
    }
}

fn scan(text: &str) -> Result<Raw> {
    let mut raw = Raw::default();
    let mut section: Option<Section> = None;
    for (k, full) in text.lines().enumerate() {
        let line = k + 1;
        let s = strip_comment(full).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(h) = s.strip_prefix('[') {
            let h = h.strip_suffix(']').ok_or_else(|| syntax(line, "section header is missing `]`"))?.trim();
            let sec = match h {
                "manifold" => Section::Manifold,
                "metric" => Section::Metric,
                "domain" => Section::Domain,
                _ => match h.split_once('.') {
                    Some(("vectorfield", name)) if valid_name(name) => {
                        raw.fields.push((name.to_string(), line, Vec::new()));
                        Section::VectorField(name.to_string())
                    }
                    Some(("oneform", name)) if valid_name(name) => {
                        raw.forms.push((name.to_string(), line, Vec::new()));
                        Section::OneForm(name.to_string())
                    }
                    _ => return Err(syntax(line, format!("unknown section [{h}]"))),
                },
            };
            let repeated = matches!(sec, Section::Manifold | Section::Metric | Section::Domain)
                && match sec {
                    Section::Manifold => !raw.manifold.is_empty(),
                    Section::Metric => !raw.metric.is_empty(),
                    _ => !raw.domain.is_empty(),
                };
            if repeated {
                return Err(syntax(line, format!("section [{h}] appears twice")));
            }
            section = Some(sec);
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| syntax(line, format!("expected `key = value`, found `{s}`")))?;
        let entry = Entry { line, key: key.trim().to_string(), value: unquote(line, value)? };
        match &section {
            None => return Err(syntax(line, "assignment before any section header")),
            Some(Section::Manifold) => raw.manifold.push(entry),
            Some(Section::Metric) => raw.metric.push(entry),
            Some(Section::Domain) => raw.domain.push(entry),
            Some(Section::VectorField(_)) => raw.fields.last_mut().expect("section opened").2.push(entry),
            Some(Section::OneForm(_)) => raw.forms.last_mut().expect("section opened").2.push(entry),
        }
    }
    Ok(raw)
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Parses `<letter>[a]` or `<letter>[a][b]` into the indices.
fn indices(line: usize, key: &str, letter: &str, count: usize) -> Result<Vec<usize>> {
    let bad = || syntax(line, format!("expected `{letter}{}`, found `{key}`", "[k]".repeat(count)));
    let mut rest = key.strip_prefix(letter).ok_or_else(bad)?.trim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let inner = rest.strip_prefix('[').ok_or_else(bad)?;
        let (idx, tail) = inner.split_once(']').ok_or_else(bad)?;
        out.push(idx.trim().parse::<usize>().map_err(|_| bad())?);
        rest = tail.trim();
    }
    if !rest.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn interval(line: usize, key: &str, value: &str) -> Result<Interval> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| syntax(line, format!("`{key}`: `{s}` is not a number")));
    match parts.as_slice() {
        [lo, hi] => Ok(Interval::new(num(lo)?, num(hi)?)),
        _ => Err(syntax(line, format!("`{key}` expects `lo, hi`"))),
    }
}

fn build(raw: Raw, default_name: &str) -> Result<ManifoldSpec> {
    let mut name = default_name.to_string();
    let mut dim: Option<(usize, usize)> = None;
    let mut coords: Option<(usize, Vec<String>)> = None;
    let mut seen = BTreeMap::new();
    for e in &raw.manifold {
        if let Some(prev) = seen.insert(e.key.clone(), e.line) {
            return Err(syntax(e.line, format!("`{}` already set on line {prev}", e.key)));
        }
        match e.key.as_str() {
            "name" => name = e.value.clone(),
            "dim" => {
                let d = e.value.parse().map_err(|_| syntax(e.line, format!("dim `{}` is not a count", e.value)))?;
                dim = Some((e.line, d));
            }
            "coords" => {
                let list = e.value.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
                coords = Some((e.line, list));
            }
            k => return Err(syntax(e.line, format!("unknown [manifold] key `{k}`"))),
        }
    }
    let (coords_line, coords) = coords.ok_or_else(|| syntax(1, "[manifold] must declare `coords`"))?;
    if let Some((line, d)) = dim {
        if d != coords.len() {
            return Err(LoadError::AtLine {
                line,
                source: SpecError::DimensionMismatch { what: "coords".into(), expected: d, found: coords.len() },
            });
        }
    }
    let at = |line: usize| move |source: SpecError| LoadError::AtLine { line, source };
    let mut b = SpecBuilder::new(&name, &coords).map_err(at(coords_line))?;
    let n = b.dim();

    for e in &raw.metric {
        let ix = indices(e.line, &e.key, "g", 2)?;
        b.metric(ix[0], ix[1], &e.value).map_err(at(e.line))?;
    }

    let mut base: Vec<Option<Interval>> = vec![None; n];
    let mut fiber: Vec<Option<Interval>> = vec![None; n];
    let mut fiber_all: Option<Interval> = None;
    for e in &raw.domain {
        let iv = interval(e.line, &e.key, &e.value)?;
        let coord_index = |c: &str| coords.iter().position(|x| x == c).ok_or_else(|| syntax(e.line, format!("unknown coordinate `{c}`")));
        let slot = if e.key == "fiber" {
            &mut fiber_all
        } else if let Some(c) = e.key.strip_prefix("fiber.") {
            &mut fiber[coord_index(c.trim())?]
        } else {
            &mut base[coord_index(&e.key)?]
        };
        if slot.is_some() {
            return Err(syntax(e.line, format!("interval for `{}` given twice", e.key)));
        }
        *slot = Some(iv);
    }
    let fill = |v: Vec<Option<Interval>>, d: Option<Interval>| -> Vec<Interval> {
        v.into_iter().map(|iv| iv.or(d).unwrap_or(Interval::new(-1.0, 1.0))).collect()
    };
    b.base_domain(fill(base, None));
    b.fiber_domain(fill(fiber, fiber_all));

    for (fname, line, entries) in &raw.fields {
        let comps = components(n, "X", entries)?;
        b.vector_field(fname, &comps).map_err(at(*line))?;
    }
    for (fname, line, entries) in &raw.forms {
        let comps = components(n, "w", entries)?;
        b.one_form(fname, &comps).map_err(at(*line))?;
    }
    Ok(b.build()?)
}

fn components(n: usize, letter: &str, entries: &[Entry]) -> Result<Vec<String>> {
    let mut out: Vec<Option<String>> = vec![None; n];
    for e in entries {
        let k = indices(e.line, &e.key, letter, 1)?[0];
        if k >= n {
            return Err(LoadError::AtLine {
                line: e.line,
                source: SpecError::IndexOutOfRange { what: format!("{letter}[{k}]"), index: k, dim: n },
            });
        }
        if out[k].replace(e.value.clone()).is_some() {
            return Err(syntax(e.line, format!("{letter}[{k}] given twice")));
        }
    }
    Ok(out.into_iter().map(|c| c.unwrap_or_else(|| "0".into())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"
# round sphere
[manifold]
name = "sphere"
dim = 2
coords = "theta, phi"

[metric]
g[0][0] = "1"
g[1][1] = "sin(theta)^2"

[domain]
theta = 0.3, 2.8
phi = -3, 3
fiber = -1, 1

[vectorfield.dphi]
X[1] = "1"
"#;

    #[test]
    fn parses_sphere() {
        let s = parse_spec(SPHERE, "x").unwrap();
        assert_eq!(s.name(), "sphere");
        assert_eq!(s.dim(), 2);
        assert_eq!(s.coords(), ["theta", "phi"]);
        assert_eq!(s.vector_fields().len(), 1);
        assert_eq!(s.base_domain()[0], Interval::new(0.3, 2.8));
        let g = s.metric_at(&[1.0, 0.0]).unwrap();
        assert!((g[(1, 1)] - 1f64.sin().powi(2)).abs() < 1e-15);
        let x = s.covariant_derivatives_at("dphi", &[1.0, 0.0]).unwrap();
        assert_eq!(x.0.nrows(), 2);
    }

    #[test]
    fn symmetric_completion() {
        let text = "[manifold]\ncoords = u, v\n[metric]\ng[0][0] = 2\ng[1][1] = 2\ng[0][1] = \"0.5*u\"\n";
        let s = parse_spec(text, "t").unwrap();
        let g = s.metric_at(&[0.4, 0.0]).unwrap();
        assert_eq!(g[(1, 0)], 0.2);
        assert_eq!(s.name(), "t");
    }

    #[test]
    fn singular_domain_is_rejected() {
        let text = SPHERE.replace("theta = 0.3, 2.8", "theta = 0, 2.8");
        let err = parse_spec(&text, "x").unwrap_err();
        assert!(matches!(err, LoadError::Spec(SpecError::SingularDomain { .. })), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[manifold]\ncoords = u\n[metric]\ng[0] = 1\n", 4),
            ("[manifold]\ncoords = u\n[metric]\ng[0][0] = \"1 +\"\n", 4),
            ("[manifold]\ndim = 3\ncoords = u, v\n", 2),
            ("[manifold]\ncoords = u\n[bogus]\n", 3),
            ("x = 1\n", 1),
            ("[manifold]\ncoords = u\n[domain]\nw = 0, 1\n", 4),
            ("[manifold]\ncoords = u\n[domain]\nu = 0\n", 4),
            ("[manifold]\ncoords = u\n[metric]\ng[0][0] = 1\n[vectorfield.a]\nX[1] = 1\n", 6),
            ("[manifold]\ncoords = u, v\n[metric]\ng[0][1] = u\ng[1][0] = v\n", 5),
        ];
        for (text, line) in cases {
            let err = parse_spec(text, "t").unwrap_err();
            assert_eq!(err.line(), Some(line), "{text:?}: {err}");
        }
    }

    #[test]
    fn comments_and_quotes() {
        let text = "[manifold] # head\ncoords = \"a#b\"\n";
        assert!(parse_spec(text, "t").is_err());
        let text = "[manifold]\ncoords = \"u\" # trailing\n[metric]\ng[0][0] = \"1\"\n";
        assert_eq!(parse_spec(text, "t").unwrap().coords(), ["u"]);
    }
}
