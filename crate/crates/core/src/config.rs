//! Structured text formats: group-definition files and run configurations.
//!
//! Both are line-oriented key-value trees. A line starts with a key, `{`
//! opens a block, `}` closes it, `#` starts a comment. Expression payloads
//! use the parenthesized prefix syntax of [`crate::expr::parse_expr`];
//! identifiers that match declared chart coordinates parse as coordinate
//! variables, everything else as parameters.
//!
//! Group-definition schema:
//!
//! ```text
//! group <name>
//! algebra {
//!   dim <n>
//!   c <a> <b> <c> <rational>     # C^a_{bc}, 1-based, antisymmetric partner implied
//!   casimir <expr in f1..fn>     # optional, repeatable
//! }
//! chart {
//!   coord <name> line
//!   coord <name> periodic <start> <length>
//!   identity <r1> ... <rn>
//!   compose <coord> <expr in c:1, c:2>
//!   inverse <coord> <expr in coords>
//! }
//! ```
//!
//! Run-configuration schema (all blocks optional unless a command needs
//! them):
//!
//! ```text
//! group <catalog name | path/to/file.group>
//! seed <u64>
//! metric {
//!   upper <i> <j> <expr>         # entries of G^{ab}, symmetric partner implied
//! }
//! orbit {
//!   lambda <expr> ... <expr>     # n covector components
//!   polarization <r1> ... <rn>   # one basis row per line, repeatable
//! }
//! reduction {
//!   kind <time | stationary>
//!   weight <expr in coords>
//!   potential <expr in coords>
//!   spectator <f64>
//! }
//! solver {
//!   domain box <lo> <hi> | periodic <start> <length>
//!   points <n>
//!   dt <f64>
//!   steps <n>
//!   initial <expr in q>
//!   output_every <n>
//! }
//! sweep {
//!   param <name> <from> <to> <count>
//! }
//! ```

use thiserror::Error;

use crate::algebra::{AlgebraError, CasimirPolynomial, LieAlgebraSpec};
use crate::expr::{parse_expr, Rat, SymExpr};
use crate::group::{CoordRange, GroupChart};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: expression error: {source}")]
    Expr {
        line: usize,
        #[source]
        source: crate::expr::ParseError,
    },
    #[error("validation: {0}")]
    Validation(String),
    #[error("algebra: {0}")]
    Algebra(#[from] AlgebraError),
}

fn perr(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        msg: msg.into(),
    }
}

/// One parsed line: keyword, argument tokens, source line number.
#[derive(Debug, Clone)]
struct Entry {
    key: String,
    args: Vec<String>,
    rest: String,
    line: usize,
}

#[derive(Debug, Clone)]
enum Item {
    Leaf(Entry),
    Block(Entry, Vec<Item>),
}

fn tokenize_tree(src: &str) -> Result<Vec<Item>, ConfigError> {
    let mut stack: Vec<(Entry, Vec<Item>)> = Vec::new();
    let mut top: Vec<Item> = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "}" {
            let (entry, items) = stack.pop().ok_or_else(|| perr(line_no, "unmatched `}`"))?;
            let item = Item::Block(entry, items);
            match stack.last_mut() {
                Some((_, items)) => items.push(item),
                None => top.push(item),
            }
            continue;
        }
        let opens_block = line.ends_with('{');
        let body = if opens_block {
            line[..line.len() - 1].trim()
        } else {
            line
        };
        let mut parts = body.split_whitespace();
        let key = parts
            .next()
            .ok_or_else(|| perr(line_no, "missing keyword before `{`"))?
            .to_string();
        let args: Vec<String> = parts.map(|s| s.to_string()).collect();
        let rest = body[key.len()..].trim().to_string();
        let entry = Entry {
            key,
            args,
            rest,
            line: line_no,
        };
        if opens_block {
            stack.push((entry, Vec::new()));
        } else {
            match stack.last_mut() {
                Some((_, items)) => items.push(Item::Leaf(entry)),
                None => top.push(Item::Leaf(entry)),
            }
        }
    }
    if let Some((entry, _)) = stack.pop() {
        return Err(perr(entry.line, format!("unclosed block `{}`", entry.key)));
    }
    Ok(top)
}

fn parse_rat(tok: &str, line: usize) -> Result<Rat, ConfigError> {
    let parse_int = |s: &str| -> Result<i128, ConfigError> {
        s.parse()
            .map_err(|_| perr(line, format!("bad rational `{tok}`")))
    };
    if let Some((n, d)) = tok.split_once('/') {
        Ok(Rat::new(parse_int(n)?, parse_int(d)?))
    } else {
        Ok(Rat::from_integer(parse_int(tok)?))
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, ConfigError> {
    tok.parse()
        .map_err(|_| perr(line, format!("bad number `{tok}`")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, ConfigError> {
    tok.parse()
        .map_err(|_| perr(line, format!("bad count `{tok}`")))
}

fn expr_of(rest: &str, coords: &[&str], line: usize) -> Result<SymExpr, ConfigError> {
    parse_expr(rest, coords).map_err(|source| ConfigError::Expr { line, source })
}

/// A parsed group-definition file.
#[derive(Debug, Clone)]
pub struct GroupDef {
    pub name: String,
    pub algebra: LieAlgebraSpec,
    pub casimirs: Vec<CasimirPolynomial>,
    pub chart: GroupChart,
}

pub fn parse_group_def(src: &str) -> Result<GroupDef, ConfigError> {
    let items = tokenize_tree(src)?;
    let mut name = None;
    let mut algebra_items = None;
    let mut chart_items = None;
    for item in items {
        match item {
            Item::Leaf(e) if e.key == "group" => {
                name = Some(
                    e.args
                        .first()
                        .ok_or_else(|| perr(e.line, "group needs a name"))?
                        .clone(),
                );
            }
            Item::Block(e, items) if e.key == "algebra" => algebra_items = Some((e.line, items)),
            Item::Block(e, items) if e.key == "chart" => chart_items = Some((e.line, items)),
            Item::Leaf(e) | Item::Block(e, _) => {
                return Err(perr(e.line, format!("unknown top-level key `{}`", e.key)));
            }
        }
    }
    let name = name.ok_or_else(|| perr(1, "missing `group <name>`"))?;
    let (aline, algebra_items) =
        algebra_items.ok_or_else(|| perr(1, "missing `algebra { ... }` block"))?;
    let (cline, chart_items) =
        chart_items.ok_or_else(|| perr(1, "missing `chart { ... }` block"))?;

    // algebra block
    let mut dim = None;
    let mut constants: Vec<(usize, usize, usize, Rat)> = Vec::new();
    let mut casimir_lines: Vec<(usize, String)> = Vec::new();
    for item in algebra_items {
        let Item::Leaf(e) = item else {
            return Err(perr(aline, "algebra block must not contain nested blocks"));
        };
        match e.key.as_str() {
            "dim" => {
                dim = Some(parse_usize(
                    e.args
                        .first()
                        .ok_or_else(|| perr(e.line, "dim needs a value"))?,
                    e.line,
                )?)
            }
            "c" => {
                if e.args.len() != 4 {
                    return Err(perr(e.line, "c needs: a b c value"));
                }
                let a = parse_usize(&e.args[0], e.line)?;
                let b = parse_usize(&e.args[1], e.line)?;
                let c = parse_usize(&e.args[2], e.line)?;
                if a == 0 || b == 0 || c == 0 {
                    return Err(perr(e.line, "structure constant indices are 1-based"));
                }
                let v = parse_rat(&e.args[3], e.line)?;
                constants.push((a - 1, b - 1, c - 1, v));
            }
            "casimir" => casimir_lines.push((e.line, e.rest.clone())),
            other => return Err(perr(e.line, format!("unknown algebra key `{other}`"))),
        }
    }
    let dim = dim.ok_or_else(|| perr(aline, "algebra block missing `dim`"))?;
    let algebra = LieAlgebraSpec::new(dim, &constants)?;
    let dual_names: Vec<String> = algebra.dual_coord_names();
    let dual_refs: Vec<&str> = dual_names.iter().map(|s| s.as_str()).collect();
    let mut casimirs = Vec::new();
    for (line, text) in casimir_lines {
        casimirs.push(CasimirPolynomial {
            expr: expr_of(&text, &dual_refs, line)?,
        });
    }

    // chart block
    let mut coords: Vec<String> = Vec::new();
    let mut ranges: Vec<CoordRange> = Vec::new();
    let mut identity: Option<Vec<Rat>> = None;
    let mut compose_lines: Vec<(usize, String, String)> = Vec::new();
    let mut inverse_lines: Vec<(usize, String, String)> = Vec::new();
    for item in chart_items {
        let Item::Leaf(e) = item else {
            return Err(perr(cline, "chart block must not contain nested blocks"));
        };
        match e.key.as_str() {
            "coord" => {
                let cname = e
                    .args
                    .first()
                    .ok_or_else(|| perr(e.line, "coord needs a name"))?
                    .clone();
                let kind = e.args.get(1).map(|s| s.as_str()).unwrap_or("line");
                let range = match kind {
                    "line" => CoordRange::Line,
                    "periodic" => {
                        if e.args.len() != 4 {
                            return Err(perr(e.line, "periodic coord needs: start length"));
                        }
                        CoordRange::Periodic {
                            start: parse_f64(&e.args[2], e.line)?,
                            period: parse_f64(&e.args[3], e.line)?,
                        }
                    }
                    other => return Err(perr(e.line, format!("unknown coord kind `{other}`"))),
                };
                coords.push(cname);
                ranges.push(range);
            }
            "identity" => {
                let vals: Result<Vec<Rat>, _> =
                    e.args.iter().map(|t| parse_rat(t, e.line)).collect();
                identity = Some(vals?);
            }
            "compose" => {
                let cname = e
                    .args
                    .first()
                    .ok_or_else(|| perr(e.line, "compose needs a coordinate"))?
                    .clone();
                let rest = e.rest[cname.len()..].trim().to_string();
                compose_lines.push((e.line, cname, rest));
            }
            "inverse" => {
                let cname = e
                    .args
                    .first()
                    .ok_or_else(|| perr(e.line, "inverse needs a coordinate"))?
                    .clone();
                let rest = e.rest[cname.len()..].trim().to_string();
                inverse_lines.push((e.line, cname, rest));
            }
            other => return Err(perr(e.line, format!("unknown chart key `{other}`"))),
        }
    }
    if coords.len() != dim {
        return Err(ConfigError::Validation(format!(
            "chart has {} coordinates but the algebra dimension is {dim}",
            coords.len()
        )));
    }
    let identity = identity.ok_or_else(|| perr(cline, "chart block missing `identity`"))?;
    if identity.len() != dim {
        return Err(ConfigError::Validation("identity arity mismatch".into()));
    }

    // Expression contexts: compose sees c:1/c:2, inverse sees bare coords.
    let compose_ctx: Vec<String> = coords
        .iter()
        .flat_map(|c| [format!("{c}:1"), format!("{c}:2")])
        .collect();
    let compose_refs: Vec<&str> = compose_ctx.iter().map(|s| s.as_str()).collect();
    let coord_refs: Vec<&str> = coords.iter().map(|s| s.as_str()).collect();

    let mut compose = vec![None; dim];
    for (line, cname, text) in compose_lines {
        let mu = coords
            .iter()
            .position(|c| c == &cname)
            .ok_or_else(|| perr(line, format!("unknown coordinate `{cname}`")))?;
        compose[mu] = Some(expr_of(&text, &compose_refs, line)?);
    }
    let mut inverse = vec![None; dim];
    for (line, cname, text) in inverse_lines {
        let mu = coords
            .iter()
            .position(|c| c == &cname)
            .ok_or_else(|| perr(line, format!("unknown coordinate `{cname}`")))?;
        inverse[mu] = Some(expr_of(&text, &coord_refs, line)?);
    }
    let compose: Vec<SymExpr> = compose
        .into_iter()
        .enumerate()
        .map(|(mu, e)| {
            e.ok_or_else(|| {
                ConfigError::Validation(format!("missing compose rule for `{}`", coords[mu]))
            })
        })
        .collect::<Result<_, _>>()?;
    let inverse: Vec<SymExpr> = inverse
        .into_iter()
        .enumerate()
        .map(|(mu, e)| {
            e.ok_or_else(|| {
                ConfigError::Validation(format!("missing inverse rule for `{}`", coords[mu]))
            })
        })
        .collect::<Result<_, _>>()?;

    let chart = GroupChart {
        coords,
        ranges,
        compose,
        identity,
        inverse,
    };
    Ok(GroupDef {
        name,
        algebra,
        casimirs,
        chart,
    })
}

/// Parsed run configuration (commands pick the blocks they need).
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub group: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub metric_upper: Vec<(usize, usize, String)>,
    pub orbit_lambda: Vec<String>,
    pub orbit_polarization: Vec<Vec<Rat>>,
    pub reduction_kind: Option<String>,
    pub reduction_weight: Option<String>,
    pub reduction_potential: Option<String>,
    pub reduction_spectator: Option<f64>,
    pub solver_domain: Option<SolverDomain>,
    pub solver_points: Option<usize>,
    pub solver_dt: Option<f64>,
    pub solver_steps: Option<usize>,
    pub solver_initial: Option<String>,
    pub solver_output_every: Option<usize>,
    pub sweep_params: Vec<SweepParam>,
    /// Canonical text of the config (content hash input).
    pub canonical: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverDomain {
    Box { lo: f64, hi: f64 },
    Periodic { start: f64, period: f64 },
}

#[derive(Debug, Clone)]
pub struct SweepParam {
    pub name: String,
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

pub fn parse_run_config(src: &str) -> Result<RunConfig, ConfigError> {
    let items = tokenize_tree(src)?;
    let mut cfg = RunConfig {
        canonical: canonical_text(src),
        ..Default::default()
    };
    for item in items {
        match item {
            Item::Leaf(e) => match e.key.as_str() {
                "group" => cfg.group = Some(e.rest.clone()),
                "seed" => {
                    cfg.seed = Some(
                        e.rest
                            .parse()
                            .map_err(|_| perr(e.line, "seed must be an unsigned integer"))?,
                    )
                }
                "out" => cfg.out = Some(e.rest.clone()),
                other => return Err(perr(e.line, format!("unknown top-level key `{other}`"))),
            },
            Item::Block(e, items) => match e.key.as_str() {
                "metric" => {
                    for it in items {
                        let Item::Leaf(l) = it else {
                            return Err(perr(e.line, "metric block must be flat"));
                        };
                        if l.key != "upper" || l.args.len() < 3 {
                            return Err(perr(l.line, "metric entries: upper <i> <j> <expr>"));
                        }
                        let i = parse_usize(&l.args[0], l.line)?;
                        let j = parse_usize(&l.args[1], l.line)?;
                        if i == 0 || j == 0 {
                            return Err(perr(l.line, "metric indices are 1-based"));
                        }
                        let rest = l.rest[l.args[0].len()..].trim_start()[l.args[1].len()..]
                            .trim()
                            .to_string();
                        cfg.metric_upper.push((i - 1, j - 1, rest));
                    }
                }
                "orbit" => {
                    for it in items {
                        let Item::Leaf(l) = it else {
                            return Err(perr(e.line, "orbit block must be flat"));
                        };
                        match l.key.as_str() {
                            "lambda" => {
                                cfg.orbit_lambda = split_exprs(&l.rest);
                            }
                            "polarization" => {
                                let row: Result<Vec<Rat>, _> =
                                    l.args.iter().map(|t| parse_rat(t, l.line)).collect();
                                cfg.orbit_polarization.push(row?);
                            }
                            other => {
                                return Err(perr(l.line, format!("unknown orbit key `{other}`")))
                            }
                        }
                    }
                }
                "reduction" => {
                    for it in items {
                        let Item::Leaf(l) = it else {
                            return Err(perr(e.line, "reduction block must be flat"));
                        };
                        match l.key.as_str() {
                            "kind" => cfg.reduction_kind = Some(l.rest.clone()),
                            "weight" => cfg.reduction_weight = Some(l.rest.clone()),
                            "potential" => cfg.reduction_potential = Some(l.rest.clone()),
                            "spectator" => {
                                cfg.reduction_spectator = Some(parse_f64(&l.rest, l.line)?)
                            }
                            other => {
                                return Err(perr(
                                    l.line,
                                    format!("unknown reduction key `{other}`"),
                                ))
                            }
                        }
                    }
                }
                "solver" => {
                    for it in items {
                        let Item::Leaf(l) = it else {
                            return Err(perr(e.line, "solver block must be flat"));
                        };
                        match l.key.as_str() {
                            "domain" => {
                                let kind = l.args.first().map(|s| s.as_str());
                                cfg.solver_domain = Some(match kind {
                                    Some("box") if l.args.len() == 3 => SolverDomain::Box {
                                        lo: parse_f64(&l.args[1], l.line)?,
                                        hi: parse_f64(&l.args[2], l.line)?,
                                    },
                                    Some("periodic") if l.args.len() == 3 => {
                                        SolverDomain::Periodic {
                                            start: parse_f64(&l.args[1], l.line)?,
                                            period: parse_f64(&l.args[2], l.line)?,
                                        }
                                    }
                                    _ => {
                                        return Err(perr(
                                            l.line,
                                            "domain: box <lo> <hi> | periodic <start> <length>",
                                        ))
                                    }
                                });
                            }
                            "points" => cfg.solver_points = Some(parse_usize(&l.rest, l.line)?),
                            "dt" => cfg.solver_dt = Some(parse_f64(&l.rest, l.line)?),
                            "steps" => cfg.solver_steps = Some(parse_usize(&l.rest, l.line)?),
                            "initial" => cfg.solver_initial = Some(l.rest.clone()),
                            "output_every" => {
                                cfg.solver_output_every = Some(parse_usize(&l.rest, l.line)?)
                            }
                            other => {
                                return Err(perr(l.line, format!("unknown solver key `{other}`")))
                            }
                        }
                    }
                }
                "sweep" => {
                    for it in items {
                        let Item::Leaf(l) = it else {
                            return Err(perr(e.line, "sweep block must be flat"));
                        };
                        if l.key != "param" || l.args.len() != 4 {
                            return Err(perr(
                                l.line,
                                "sweep entries: param <name> <from> <to> <count>",
                            ));
                        }
                        cfg.sweep_params.push(SweepParam {
                            name: l.args[0].clone(),
                            from: parse_f64(&l.args[1], l.line)?,
                            to: parse_f64(&l.args[2], l.line)?,
                            count: parse_usize(&l.args[3], l.line)?,
                        });
                    }
                }
                other => return Err(perr(e.line, format!("unknown block `{other}`"))),
            },
        }
    }
    Ok(cfg)
}

/// Split a whitespace-separated list of prefix expressions, respecting
/// parentheses.
fn split_exprs(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth -= 1;
                cur.push(ch);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Comment-stripped, whitespace-normalized text used for config hashing.
pub fn canonical_text(src: &str) -> String {
    src.lines()
        .map(|l| match l.find('#') {
            Some(p) => &l[..p],
            None => l,
        })
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// FNV-1a over the canonical text, rendered as fixed-width hex.
pub fn config_hash(canonical: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_lines() {
        let err = parse_group_def("group g\nalgebra {\n dim x\n}\nchart {\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err2 = parse_group_def("group g\nalgebra {\n dim 2\n").unwrap_err();
        assert!(err2.to_string().contains("unclosed"), "{err2}");
    }

    #[test]
    fn config_hash_ignores_comments_and_spacing() {
        let a = canonical_text("seed 1\n# note\nmetric {\n upper 1 1 d1\n}\n");
        let b = canonical_text("seed  1\nmetric {\nupper 1 1   d1\n}\n");
        assert_eq!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn split_exprs_respects_parens() {
        let parts = split_exprs("(+ j 1) 0 (* 2 j2)");
        assert_eq!(parts, vec!["(+ j 1)", "0", "(* 2 j2)"]);
    }
}
