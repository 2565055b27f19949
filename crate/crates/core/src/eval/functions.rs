use super::{CellValue, ErrorCode};

/// An evaluated function argument.
pub(crate) enum Arg {
    Scalar(CellValue),
    Range(Vec<CellValue>),
}

pub(crate) fn to_number(v: &CellValue) -> Result<f64, ErrorCode> {
    match v {
        CellValue::Number(n) => Ok(*n),
        CellValue::Bool(b) => Ok(if *b { 1.0 } else { 0.0 }),
        CellValue::Blank => Ok(0.0),
        CellValue::Text(_) => Err(ErrorCode::Value),
        CellValue::Error(e) => Err(*e),
    }
}

pub(crate) fn to_text(v: &CellValue) -> Result<String, ErrorCode> {
    match v {
        CellValue::Number(n) => Ok(crate::formula::format_number(*n)),
        CellValue::Bool(b) => Ok(if *b { "TRUE" } else { "FALSE" }.into()),
        CellValue::Blank => Ok(String::new()),
        CellValue::Text(t) => Ok(t.clone()),
        CellValue::Error(e) => Err(*e),
    }
}

pub(crate) fn to_bool(v: &CellValue) -> Result<bool, ErrorCode> {
    match v {
        CellValue::Number(n) => Ok(*n != 0.0),
        CellValue::Bool(b) => Ok(*b),
        CellValue::Blank => Ok(false),
        CellValue::Text(_) => Err(ErrorCode::Value),
        CellValue::Error(e) => Err(*e),
    }
}

pub(crate) fn finite(n: f64) -> CellValue {
    if n.is_finite() {
        CellValue::Number(n)
    } else {
        CellValue::Error(ErrorCode::Value)
    }
}

/// Numbers contributed by aggregation arguments; ranges skip blanks, text and booleans.
fn numbers(args: &[Arg]) -> Result<Vec<f64>, ErrorCode> {
    let mut out = Vec::new();
    for arg in args {
        match arg {
            Arg::Scalar(v) => out.push(to_number(v)?),
            Arg::Range(values) => {
                for v in values {
                    match v {
                        CellValue::Number(n) => out.push(*n),
                        CellValue::Error(e) => return Err(*e),
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(out)
}

fn scalar(arg: &Arg) -> Result<&CellValue, ErrorCode> {
    match arg {
        Arg::Scalar(v) => Ok(v),
        Arg::Range(_) => Err(ErrorCode::Value),
    }
}

/// Calls a builtin on already-evaluated (eager) arguments.
pub(crate) fn call(name: &str, args: &[Arg]) -> CellValue {
    let result = match name {
        "SUM" => numbers(args).map(|ns| finite(ns.iter().sum())),
        "AVERAGE" => numbers(args).and_then(|ns| {
            if ns.is_empty() {
                Err(ErrorCode::Div0)
            } else {
                Ok(finite(ns.iter().sum::<f64>() / ns.len() as f64))
            }
        }),
        "MIN" => numbers(args).map(|ns| CellValue::Number(ns.into_iter().reduce(f64::min).unwrap_or(0.0))),
        "MAX" => numbers(args).map(|ns| CellValue::Number(ns.into_iter().reduce(f64::max).unwrap_or(0.0))),
        "COUNT" => numbers(args).map(|ns| CellValue::Number(ns.len() as f64)),
        "ABS" => match args {
            [x] => scalar(x).and_then(to_number).map(|n| CellValue::Number(n.abs())),
            _ => Err(ErrorCode::Value),
        },
        "ROUND" => match args {
            [x, d] => scalar(x)
                .and_then(to_number)
                .and_then(|x| Ok((x, scalar(d).and_then(to_number)?)))
                .map(|(x, d)| finite(round_half_away(x, d.trunc().clamp(-400.0, 400.0) as i32))),
            _ => Err(ErrorCode::Value),
        },
        "IF" => match args {
            [c, a] | [c, a, _] => {
                // eager: every argument is inspected for errors first
                let values: Result<Vec<&CellValue>, ErrorCode> = args.iter().map(scalar).collect();
                values.and_then(|vs| {
                    if let Some(CellValue::Error(e)) = vs.iter().find(|v| matches!(v, CellValue::Error(_))) {
                        return Err(*e);
                    }
                    let chosen = if to_bool(scalar(c)?)? {
                        scalar(a)?.clone()
                    } else if args.len() == 3 {
                        vs[2].clone()
                    } else {
                        CellValue::Bool(false)
                    };
                    Ok(chosen)
                })
            }
            _ => Err(ErrorCode::Value),
        },
        _ => Err(ErrorCode::Name),
    };
    result.unwrap_or_else(CellValue::Error)
}

/// Rounds half away from zero on the shortest decimal representation of `x`,
/// so 2.675 rounds to 2.68 even though its binary value is slightly below.
pub fn round_half_away(x: f64, digits: i32) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let text = format!("{}", x.abs());
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let mut mantissa: Vec<u8> = int.bytes().chain(frac.bytes()).collect();
    let int_len = int.len() as i64;
    let keep = int_len + digits as i64;
    if keep < 0 {
        return 0.0;
    }
    let keep = keep as usize;
    if keep >= mantissa.len() {
        return x;
    }
    let round_up = mantissa[keep] >= b'5';
    mantissa.truncate(keep);
    let mut int_len = int_len as usize;
    if round_up {
        let mut i = mantissa.len();
        loop {
            if i == 0 {
                mantissa.insert(0, b'1');
                int_len += 1;
                break;
            }
            i -= 1;
            if mantissa[i] == b'9' {
                mantissa[i] = b'0';
            } else {
                mantissa[i] += 1;
                break;
            }
        }
    }
    let mut out = String::new();
    if mantissa.len() <= int_len {
        out.extend(mantissa.iter().map(|&b| b as char));
        out.extend(std::iter::repeat_n('0', int_len - mantissa.len()));
    } else {
        out.extend(mantissa[..int_len].iter().map(|&b| b as char));
        out.push('.');
        out.extend(mantissa[int_len..].iter().map(|&b| b as char));
    }
    if out.is_empty() {
        return 0.0;
    }
    let magnitude: f64 = out.parse().expect("decimal digits");
    magnitude.copysign(x)
}
