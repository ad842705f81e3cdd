//! Variety descriptions from JSON files: polynomial leaves plus a
//! constructor tree. Syntax errors carry serde's line and column; semantic
//! errors carry the JSON path of the offending node.

use std::path::Path;

use nalgebra::DVector;
use rand_chacha::ChaCha12Rng;
use serde_json::Value;

use crate::config::{rng_stream, Tolerances};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::frames::DirectionField;
use crate::jets::C;
use crate::variety::Variety;

pub fn load_spec(path: &Path, seed: u64, tol: &Tolerances) -> Result<Variety> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {}", path.display(), e)))?;
    let mut rng = rng_stream(seed, 0x10ad);
    build_node(&value, "$", seed, &mut rng, tol)
}

/// Build a variety from an already-parsed JSON node (used by tests).
pub fn build_from_value(value: &Value, seed: u64, tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x10ad);
    build_node(value, "$", seed, &mut rng, tol)
}

fn input(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("{path}: {msg}"))
}

fn build_node(
    v: &Value,
    path: &str,
    seed: u64,
    rng: &mut ChaCha12Rng,
    tol: &Tolerances,
) -> Result<Variety> {
    let obj = v
        .as_object()
        .ok_or_else(|| input(path, "expected an object"))?;
    if obj.contains_key("op") {
        build_constructor(v, path, seed, rng, tol)
    } else if obj.get("kind").and_then(Value::as_str) == Some("polynomial") {
        build_polynomial(v, path)
    } else {
        Err(input(
            path,
            "expected \"kind\": \"polynomial\" or a constructor \"op\"",
        ))
    }
}

fn parse_complex(v: &Value, path: &str) -> Result<C> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| input(path, "complex numbers are [re, im] pairs"))?;
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| input(path, "complex real part must be a number"))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| input(path, "complex imaginary part must be a number"))?;
    Ok(C::new(re, im))
}

/// One coordinate: a list of {"monomial": [e...], "coeff": [re, im]} terms.
/// Returns the expression and the parameter count seen (None when empty).
fn parse_coord(v: &Value, path: &str) -> Result<(Expr, Option<usize>)> {
    let terms_json = v
        .as_array()
        .ok_or_else(|| input(path, "a coordinate is a list of monomial terms"))?;
    let mut terms: Vec<(Vec<u32>, C)> = Vec::new();
    let mut params: Option<usize> = None;
    for (i, term) in terms_json.iter().enumerate() {
        let tpath = format!("{path}[{i}]");
        let obj = term
            .as_object()
            .ok_or_else(|| input(&tpath, "expected a term object"))?;
        let mono_json = obj
            .get("monomial")
            .and_then(Value::as_array)
            .ok_or_else(|| input(&tpath, "missing \"monomial\" exponent list"))?;
        let mono: Vec<u32> = mono_json
            .iter()
            .map(|e| {
                e.as_u64()
                    .map(|x| x as u32)
                    .ok_or_else(|| input(&tpath, "exponents must be nonnegative integers"))
            })
            .collect::<Result<_>>()?;
        match params {
            None => params = Some(mono.len()),
            Some(p) if p != mono.len() => {
                return Err(input(
                    &tpath,
                    format!("monomial length {} does not match {}", mono.len(), p),
                ))
            }
            _ => {}
        }
        let coeff = parse_complex(
            obj.get("coeff")
                .ok_or_else(|| input(&tpath, "missing \"coeff\""))?,
            &tpath,
        )?;
        terms.push((mono, coeff));
    }
    Ok((Expr::polynomial(&terms), params))
}

fn parse_coord_array(v: &Value, path: &str, expected_len: Option<usize>) -> Result<(Vec<Expr>, usize)> {
    let arr = v
        .as_array()
        .ok_or_else(|| input(path, "expected a list of coordinates"))?;
    if let Some(len) = expected_len {
        if arr.len() != len {
            return Err(input(
                path,
                format!("expected {len} coordinates, got {}", arr.len()),
            ));
        }
    }
    let mut coords = Vec::with_capacity(arr.len());
    let mut params: Option<usize> = None;
    for (i, cj) in arr.iter().enumerate() {
        let cpath = format!("{path}[{i}]");
        let (e, p) = parse_coord(cj, &cpath)?;
        if let Some(p) = p {
            match params {
                None => params = Some(p),
                Some(q) if q != p => {
                    return Err(input(
                        &cpath,
                        format!("parameter count {p} conflicts with {q}"),
                    ))
                }
                _ => {}
            }
        }
        coords.push(e);
    }
    let n = params.ok_or_else(|| input(path, "cannot infer parameter count (all coordinates empty)"))?;
    Ok((coords, n))
}

fn build_polynomial(v: &Value, path: &str) -> Result<Variety> {
    let obj = v.as_object().expect("checked by caller");
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .unwrap_or("variety")
        .to_string();
    let ambient = obj
        .get("ambient_dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| input(path, "missing integer \"ambient_dim\""))? as usize;
    let coords_json = obj
        .get("coords")
        .ok_or_else(|| input(path, "missing \"coords\""))?;
    let (coords, n) = parse_coord_array(
        coords_json,
        &format!("{path}.coords"),
        Some(ambient + 1),
    )?;
    Variety::from_polynomials(name, n, ambient, coords)
}

fn build_constructor(
    v: &Value,
    path: &str,
    seed: u64,
    rng: &mut ChaCha12Rng,
    tol: &Tolerances,
) -> Result<Variety> {
    let obj = v.as_object().expect("checked by caller");
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| input(path, "\"op\" must be a string"))?;
    let empty = Vec::new();
    let args_json = obj
        .get("args")
        .map(|a| {
            a.as_array()
                .ok_or_else(|| input(path, "\"args\" must be a list"))
        })
        .transpose()?
        .unwrap_or(&empty);
    let options = obj.get("options").and_then(Value::as_object);
    let opt = |key: &str| options.and_then(|o| o.get(key));

    let mut args = Vec::with_capacity(args_json.len());
    for (i, a) in args_json.iter().enumerate() {
        args.push(build_node(a, &format!("{path}.args[{i}]"), seed, rng, tol)?);
    }
    let need_args = |count: usize| -> Result<()> {
        if args.len() != count {
            return Err(input(
                path,
                format!("\"{op}\" takes {count} argument(s), got {}", args.len()),
            ));
        }
        Ok(())
    };

    let mut built = match op {
        "join" => {
            if args.len() < 2 {
                return Err(input(path, "\"join\" needs at least two arguments"));
            }
            Variety::join(&args)?
        }
        "cone" => {
            need_args(1)?;
            let vertex_json = opt("vertex")
                .and_then(Value::as_array)
                .ok_or_else(|| input(path, "\"cone\" needs options.vertex: a list of points"))?;
            let dim = args[0].ambient() + 1;
            let mut points = Vec::with_capacity(vertex_json.len());
            for (i, pj) in vertex_json.iter().enumerate() {
                let ppath = format!("{path}.options.vertex[{i}]");
                let arr = pj
                    .as_array()
                    .filter(|a| a.len() == dim)
                    .ok_or_else(|| input(&ppath, format!("a point is a list of {dim} complex pairs")))?;
                let comps: Vec<C> = arr
                    .iter()
                    .map(|c| parse_complex(c, &ppath))
                    .collect::<Result<_>>()?;
                points.push(DVector::from_vec(comps));
            }
            Variety::cone(&args[0], &points)?
        }
        "secant" => {
            need_args(1)?;
            let k = opt("k").and_then(Value::as_u64).unwrap_or(2) as usize;
            Variety::secant_variety(&args[0], k)?
        }
        "tangential" => {
            need_args(1)?;
            Variety::tangential_variety(&args[0])?
        }
        "osculating" => {
            need_args(1)?;
            let order = opt("order").and_then(Value::as_u64).unwrap_or(2) as u32;
            Variety::osculating_variety(&args[0], order)?
        }
        "hyperband" => {
            need_args(1)?;
            let frame_json = opt("frame")
                .and_then(Value::as_array)
                .ok_or_else(|| input(path, "\"hyperband\" needs options.frame: a list of vectors"))?;
            let dim = args[0].ambient() + 1;
            let mut frame = Vec::with_capacity(frame_json.len());
            for (i, fj) in frame_json.iter().enumerate() {
                let (coords, _) = parse_coord_array(
                    fj,
                    &format!("{path}.options.frame[{i}]"),
                    Some(dim),
                )?;
                frame.push(coords);
            }
            Variety::hyperband(&args[0], &frame, rng, tol)?
        }
        "line_union" => {
            need_args(1)?;
            let field_json = opt("field")
                .and_then(Value::as_object)
                .ok_or_else(|| input(path, "\"line_union\" needs options.field"))?;
            let kind = field_json
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| input(path, "field needs a \"kind\""))?;
            let index = field_json
                .get("index")
                .and_then(Value::as_u64)
                .unwrap_or(0) as usize;
            let field = match kind {
                "user" => {
                    let comp_json = field_json.get("components").ok_or_else(|| {
                        input(path, "user fields need \"components\": one per base parameter")
                    })?;
                    let (comps, _) = parse_coord_array(
                        comp_json,
                        &format!("{path}.options.field.components"),
                        Some(args[0].n()),
                    )?;
                    DirectionField::User(comps)
                }
                "conjugate" => DirectionField::Conjugate(index),
                "asymptotic" => DirectionField::Asymptotic(index),
                "gauss_fiber" => DirectionField::GaussFiber(index),
                other => return Err(input(path, format!("unknown field kind '{other}'"))),
            };
            Variety::line_union(&args[0], field, seed, tol)?
        }
        "plane_band" => {
            need_args(1)?;
            let vec_json = opt("vector")
                .ok_or_else(|| input(path, "\"plane_band\" needs options.vector"))?;
            let dim = args[0].ambient() + 1;
            let (g, _) = parse_coord_array(vec_json, &format!("{path}.options.vector"), Some(dim))?;
            Variety::plane_band(&args[0], &g, rng, tol)?
        }
        "dual" => {
            need_args(1)?;
            Variety::dual_variety(&args[0], rng, tol)?
        }
        other => {
            return Err(input(path, format!("unknown constructor op '{other}'")));
        }
    };
    if let Some(name) = obj.get("name").and_then(Value::as_str) {
        built.name = name.to_string();
    }
    Ok(built)
}
