//! JSON file formats for distributions, graphs, distinguishers and
//! self-boosting configs, with JSON-pointer located schema errors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dist::{decode, format_tokens, Alphabet, TextDistribution, Token};
use crate::distinguisher::Distinguisher;
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;
use crate::rnn::compile::distinguisher_from_graph;
use crate::rnn::{Expr, Node, RnnGraph, Schedule};
use crate::selfboost::Variant;

/// Normalization tolerance applied when loading distribution files.
pub const LOAD_TOL: f64 = 1e-9;

fn ptr(base: &str, key: &str) -> String {
    format!("{base}/{}", key.replace('~', "~0").replace('/', "~1"))
}

fn field<'a>(obj: &'a Value, base: &str, key: &str) -> Result<&'a Value> {
    let map = obj
        .as_object()
        .ok_or_else(|| Error::schema(base, "expected an object"))?;
    map.get(key)
        .ok_or_else(|| Error::schema(ptr(base, key), "missing field"))
}

fn as_uint(v: &Value, at: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::schema(at, "expected a nonnegative integer"))
}

fn as_usize(v: &Value, at: &str) -> Result<usize> {
    usize::try_from(as_uint(v, at)?).map_err(|_| Error::schema(at, "integer out of range"))
}

fn as_f64(v: &Value, at: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::schema(at, "expected a number"))
}

fn as_array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::schema(at, "expected an array"))
}

fn uint_list(v: &Value, at: &str) -> Result<Vec<usize>> {
    as_array(v, at)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_usize(x, &format!("{at}/{i}")))
        .collect()
}

fn get_uint(obj: &Value, base: &str, key: &str) -> Result<usize> {
    as_usize(field(obj, base, key)?, &ptr(base, key))
}

fn alphabet_at(obj: &Value, base: &str) -> Result<Alphabet> {
    let size = get_uint(obj, base, "alphabet_size")?;
    Alphabet::new(size).map_err(|e| Error::schema(ptr(base, "alphabet_size"), e.to_string()))
}

pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::schema("", format!("invalid JSON: {e}")))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_json(&text)
}

/// Writes through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn distribution_to_json(p: &TextDistribution) -> Value {
    json!({ "alphabet_size": p.alphabet().size(), "n": p.n(), "probs": p.probs() })
}

pub fn distribution_from_json(v: &Value, tol: f64) -> Result<TextDistribution> {
    let alphabet = alphabet_at(v, "")?;
    let n = get_uint(v, "", "n")?;
    let probs = as_array(field(v, "", "probs")?, "/probs")?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let at = format!("/probs/{i}");
            let p = as_f64(x, &at)?;
            if p < 0.0 {
                return Err(Error::schema(at, format!("negative probability {p}")));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let expected = alphabet.count(n)?;
    if probs.len() != expected {
        return Err(Error::schema(
            "/probs",
            format!("expected {expected} probabilities, got {}", probs.len()),
        ));
    }
    TextDistribution::with_tolerance(alphabet, n, probs, tol)
}

pub fn load_distribution(path: &Path, tol: f64) -> Result<TextDistribution> {
    distribution_from_json(&read_json(path)?, tol)
}

fn schedule_to_json(s: &Schedule) -> Value {
    match s {
        Schedule::TokenEnd => json!("token_end"),
        Schedule::Offsets(os) => json!({ "offsets": os }),
    }
}

pub fn graph_to_json(g: &RnnGraph) -> Value {
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| json!({ "id": id, "name": n.name, "init": n.init, "expr": n.expr.as_ref().map(Expr::to_sexpr) }))
        .collect();
    let domains: BTreeMap<String, &Vec<f64>> = g
        .value_domains
        .iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let mut out = json!({
        "nodes": nodes,
        "input_ids": g.input_ids,
        "output_id": g.output_id,
        "hidden_ids": g.hidden_ids,
        "rnn_time": g.rnn_time,
        "schedule": schedule_to_json(&g.schedule),
    });
    let obj = out.as_object_mut().expect("object literal");
    if let Some(b) = g.bits {
        obj.insert(
            "bits".into(),
            json!({ "integer": b.integer, "fraction": b.fraction }),
        );
    }
    if !g.aux_outputs.is_empty() {
        obj.insert("aux_outputs".into(), json!(g.aux_outputs));
    }
    if !domains.is_empty() {
        obj.insert("value_domains".into(), json!(domains));
    }
    if !g.reset_on_input.is_empty() {
        obj.insert("reset_on_input".into(), json!(g.reset_on_input));
    }
    out
}

fn schedule_from_json(v: &Value, at: &str) -> Result<Schedule> {
    match v {
        Value::String(s) if s == "token_end" => Ok(Schedule::TokenEnd),
        Value::Object(_) => {
            let os = as_array(field(v, at, "offsets")?, &ptr(at, "offsets"))?
                .iter()
                .enumerate()
                .map(|(i, x)| as_uint(x, &format!("{at}/offsets/{i}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Schedule::Offsets(os))
        }
        _ => Err(Error::schema(
            at,
            "expected \"token_end\" or {\"offsets\": [...]}",
        )),
    }
}

pub fn graph_from_json_at(v: &Value, base: &str) -> Result<RnnGraph> {
    let nodes_at = ptr(base, "nodes");
    let nodes = as_array(field(v, base, "nodes")?, &nodes_at)?
        .iter()
        .enumerate()
        .map(|(i, nv)| {
            let at = format!("{nodes_at}/{i}");
            let id = get_uint(nv, &at, "id")?;
            if id != i {
                return Err(Error::schema(
                    ptr(&at, "id"),
                    format!("node ids must be consecutive from 0, expected {i}"),
                ));
            }
            let init = match nv.get("init") {
                None => 0.0,
                Some(x) => as_f64(x, &ptr(&at, "init"))?,
            };
            let name = match nv.get("name") {
                None => format!("n{i}"),
                Some(x) => x
                    .as_str()
                    .ok_or_else(|| Error::schema(ptr(&at, "name"), "expected a string"))?
                    .to_string(),
            };
            let expr = match field(nv, &at, "expr")? {
                Value::Null => None,
                Value::String(s) => Some(
                    s.parse::<Expr>()
                        .map_err(|e| Error::schema(ptr(&at, "expr"), e.to_string()))?,
                ),
                _ => {
                    return Err(Error::schema(
                        ptr(&at, "expr"),
                        "expected an s-expression string or null",
                    ))
                }
            };
            Ok(Node { name, init, expr })
        })
        .collect::<Result<Vec<_>>>()?;
    let input_ids = uint_list(field(v, base, "input_ids")?, &ptr(base, "input_ids"))?;
    let output_id = get_uint(v, base, "output_id")?;
    let hidden_ids = uint_list(field(v, base, "hidden_ids")?, &ptr(base, "hidden_ids"))?;
    let rnn_time = as_uint(field(v, base, "rnn_time")?, &ptr(base, "rnn_time"))?;
    let mut g = RnnGraph::new(nodes, input_ids, output_id, hidden_ids, rnn_time)?;
    if let Some(s) = v.get("schedule") {
        g.schedule = schedule_from_json(s, &ptr(base, "schedule"))?;
    }
    if let Some(b) = v.get("bits").filter(|b| !b.is_null()) {
        let at = ptr(base, "bits");
        let integer = u32::try_from(get_uint(b, &at, "integer")?)
            .map_err(|_| Error::schema(ptr(&at, "integer"), "too large"))?;
        let fraction = u32::try_from(get_uint(b, &at, "fraction")?)
            .map_err(|_| Error::schema(ptr(&at, "fraction"), "too large"))?;
        g.bits = Some(FixedPointFormat::new(integer, fraction));
    }
    if let Some(a) = v.get("aux_outputs") {
        let at = ptr(base, "aux_outputs");
        let map = a
            .as_object()
            .ok_or_else(|| Error::schema(&at, "expected an object"))?;
        for (name, id) in map {
            g.aux_outputs
                .insert(name.clone(), as_usize(id, &ptr(&at, name))?);
        }
    }
    if let Some(d) = v.get("value_domains") {
        let at = ptr(base, "value_domains");
        let map = d
            .as_object()
            .ok_or_else(|| Error::schema(&at, "expected an object"))?;
        for (key, vals) in map {
            let kat = ptr(&at, key);
            let id = key
                .parse::<usize>()
                .map_err(|_| Error::schema(&kat, "keys must be node ids"))?;
            let vals = as_array(vals, &kat)?
                .iter()
                .enumerate()
                .map(|(i, x)| as_f64(x, &format!("{kat}/{i}")))
                .collect::<Result<Vec<_>>>()?;
            g.value_domains.insert(id, vals);
        }
    }
    if let Some(r) = v.get("reset_on_input") {
        g.reset_on_input = uint_list(r, &ptr(base, "reset_on_input"))?;
    }
    g.validate()?;
    Ok(g)
}

pub fn graph_from_json(v: &Value) -> Result<RnnGraph> {
    graph_from_json_at(v, "")
}

pub fn load_graph(path: &Path) -> Result<RnnGraph> {
    graph_from_json(&read_json(path)?)
}

fn parse_tokens(s: &str, alphabet: Alphabet, at: &str) -> Result<Vec<Token>> {
    let parts: Vec<&str> = if s.contains('.') {
        s.split('.').collect()
    } else {
        s.split("").filter(|p| !p.is_empty()).collect()
    };
    parts
        .into_iter()
        .map(|p| match p.parse::<usize>() {
            Ok(t) if t < alphabet.size() => Ok(t as Token),
            _ => Err(Error::schema(at, format!("bad token {p:?} in {s:?}"))),
        })
        .collect()
}

/// Table form: `entries[i][x]` for position `i` and window string `x`;
/// only the 1-entries are written and absent entries read as 0.
pub fn distinguisher_to_json(d: &Distinguisher) -> Value {
    let a = d.alphabet().size();
    let mut entries = Map::new();
    for i in 1..=d.n() {
        let len = d.window_end(i);
        let row: Map<String, Value> = d
            .table(i)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(c, _)| (format_tokens(&decode(c, len, a)), json!(1)))
            .collect();
        if !row.is_empty() {
            entries.insert(i.to_string(), Value::Object(row));
        }
    }
    json!({ "kind": "table", "alphabet_size": a, "n": d.n(), "k": d.k(), "entries": entries })
}

pub fn distinguisher_from_json(v: &Value) -> Result<Distinguisher> {
    let alphabet = alphabet_at(v, "")?;
    let n = get_uint(v, "", "n")?;
    let k = get_uint(v, "", "k")?;
    let kind = field(v, "", "kind")?
        .as_str()
        .ok_or_else(|| Error::schema("/kind", "expected a string"))?;
    match kind {
        "table" => {
            let base = Distinguisher::constant(alphabet, n, k, false)?;
            let mut tables: Vec<Vec<u8>> = base.tables().to_vec();
            let entries = field(v, "", "entries")?
                .as_object()
                .ok_or_else(|| Error::schema("/entries", "expected an object"))?;
            for (pos, row) in entries {
                let at = ptr("/entries", pos);
                let i = pos
                    .parse::<usize>()
                    .ok()
                    .filter(|i| (1..=n).contains(i))
                    .ok_or_else(|| Error::schema(&at, format!("position must lie in [1, {n}]")))?;
                let row = row
                    .as_object()
                    .ok_or_else(|| Error::schema(&at, "expected an object"))?;
                for (x, bit) in row {
                    let xat = ptr(&at, x);
                    let toks = parse_tokens(x, alphabet, &xat)?;
                    if toks.len() != d_window(i, k, n) {
                        return Err(Error::schema(
                            &xat,
                            format!(
                                "window for position {i} must have {} tokens",
                                d_window(i, k, n)
                            ),
                        ));
                    }
                    let b = match bit.as_u64() {
                        Some(b @ 0..=1) => b as u8,
                        _ => return Err(Error::schema(&xat, "expected 0 or 1")),
                    };
                    tables[i - 1][crate::dist::encode(&toks, alphabet.size())] = b;
                }
            }
            Distinguisher::from_tables(alphabet, n, k, tables)
        }
        "rnn" => {
            let g = graph_from_json_at(field(v, "", "graph")?, "/graph")?;
            distinguisher_from_graph(&g, alphabet, n, k)
        }
        other => Err(Error::schema(
            "/kind",
            format!("unknown distinguisher kind {other:?}"),
        )),
    }
}

fn d_window(i: usize, k: usize, n: usize) -> usize {
    (i + k - 1).min(n)
}

pub fn load_distinguisher(path: &Path) -> Result<Distinguisher> {
    distinguisher_from_json(&read_json(path)?)
}

/// A list of distinguishers `{"members": [...]}` or a named family
/// `{"family": "one_prefix_tables" | "window_predicates"}`.
pub fn family_from_json(v: &Value) -> Result<crate::distinguisher::Family> {
    use crate::distinguisher::Family;
    if let Some(name) = v.get("family") {
        return match name.as_str() {
            Some("one_prefix_tables") => Ok(Family::OnePrefixTables),
            Some("window_predicates") => Ok(Family::WindowPredicates),
            _ => Err(Error::schema(
                "/family",
                "expected \"one_prefix_tables\" or \"window_predicates\"",
            )),
        };
    }
    let members = as_array(field(v, "", "members")?, "/members")?
        .iter()
        .enumerate()
        .map(|(i, m)| {
            distinguisher_from_json(m).map_err(|e| match e {
                Error::Schema { pointer, message } => {
                    Error::schema(format!("/members/{i}{pointer}"), message)
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if members.is_empty() {
        return Err(Error::schema("/members", "family must be nonempty"));
    }
    Ok(Family::Explicit(members))
}

pub fn load_family(path: &Path) -> Result<crate::distinguisher::Family> {
    family_from_json(&read_json(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfBoostConfig {
    pub variant: Variant,
    pub epsilon: f64,
    pub k: usize,
    pub tau: u64,
    pub d_bound: usize,
    pub seed: u64,
    pub family_file: String,
    pub distribution_file: String,
    #[serde(default)]
    pub compile: bool,
    /// Distinguisher bit size for the bits variant.
    #[serde(default)]
    pub b_d: u32,
}

pub fn selfboost_config_from_json(v: &Value) -> Result<SelfBoostConfig> {
    let variant = match field(v, "", "variant")?.as_str() {
        Some("plain") => Variant::Plain,
        Some("bits") => Variant::Bits,
        _ => return Err(Error::schema("/variant", "expected \"plain\" or \"bits\"")),
    };
    let epsilon = as_f64(field(v, "", "epsilon")?, "/epsilon")?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::schema("/epsilon", "must lie in (0, 1)"));
    }
    let string = |key: &str| -> Result<String> {
        Ok(field(v, "", key)?
            .as_str()
            .ok_or_else(|| Error::schema(ptr("", key), "expected a string"))?
            .to_string())
    };
    let compile = match v.get("compile") {
        None => false,
        Some(b) => b
            .as_bool()
            .ok_or_else(|| Error::schema("/compile", "expected a boolean"))?,
    };
    let b_d = match v.get("b_d") {
        None => 0,
        Some(x) => {
            u32::try_from(as_uint(x, "/b_d")?).map_err(|_| Error::schema("/b_d", "too large"))?
        }
    };
    Ok(SelfBoostConfig {
        variant,
        epsilon,
        k: get_uint(v, "", "k")?,
        tau: as_uint(field(v, "", "tau")?, "/tau")?,
        d_bound: get_uint(v, "", "d_bound")?,
        seed: as_uint(field(v, "", "seed")?, "/seed")?,
        family_file: string("family_file")?,
        distribution_file: string("distribution_file")?,
        compile,
        b_d,
    })
}

pub fn load_selfboost_config(path: &Path) -> Result<SelfBoostConfig> {
    selfboost_config_from_json(&read_json(path)?)
}
