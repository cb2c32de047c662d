//! Device files: one device per line, `#` starts a comment.
//!
//! ```text
//! sssc 49-50 p_flow=0.75 zse=0.01+0.01j vse_max=0.3 init=0.5+0j
//! ipfc 49-50,49-51 p_flow.1=0.75 p_flow.2=0.75 q_flow.2=0.03
//! sssc 101-102 v_bus@101=0.9
//! ```
//!
//! IPFC keys take a `.k` suffix naming the branch (1-based, in listed order).
//! `zse`, `vse_max` and `init` without a suffix apply to every branch.

use num_complex::Complex64;

use super::{
    ControlMode, IpfcBranch, IpfcDevice, IpfcTarget, SeriesDevice, SsscDevice, DEFAULT_COUPLING,
    DEFAULT_INIT_CURRENT,
};
use crate::error::{Error, Result};

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses `a`, `bj`, `a+bj`, `a-bj` and the `a+jb` spelling.
pub fn parse_complex(text: &str) -> Option<Complex64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return None;
    }
    if !t.contains(['j', 'i']) {
        return t.parse().ok().map(|re| Complex64::new(re, 0.0));
    }
    // split at the last sign that is not part of an exponent
    let bytes = t.as_bytes();
    let mut cut = 0;
    for k in 1..bytes.len() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            cut = k;
        }
    }
    let (re_part, im_part) = t.split_at(cut);
    let re = if re_part.is_empty() { 0.0 } else { re_part.parse().ok()? };
    let (sign, body) = match im_part.as_bytes().first() {
        Some(b'-') => (-1.0, &im_part[1..]),
        Some(b'+') => (1.0, &im_part[1..]),
        _ => (1.0, im_part),
    };
    let mag = body
        .strip_suffix(['j', 'i'])
        .or_else(|| body.strip_prefix(['j', 'i']))?;
    let im: f64 = if mag.is_empty() { 1.0 } else { mag.parse().ok()? };
    Some(Complex64::new(re, sign * im))
}

struct Field<'a> {
    key: &'a str,
    branch: Option<usize>,
    bus: Option<usize>,
    value: &'a str,
}

fn split_field(token: &str, column: usize, line: usize) -> Result<Field<'_>> {
    let (lhs, value) = token
        .split_once('=')
        .ok_or_else(|| err(line, column, format!("expected key=value, got '{token}'")))?;
    let (lhs, bus) = match lhs.split_once('@') {
        Some((l, b)) => (
            l,
            Some(b.parse().map_err(|_| err(line, column, format!("bad bus number '{b}'")))?),
        ),
        None => (lhs, None),
    };
    let (key, branch) = match lhs.split_once('.') {
        Some((k, b)) => {
            let n: usize = b
                .parse()
                .map_err(|_| err(line, column, format!("bad branch suffix '{b}'")))?;
            if n == 0 {
                return Err(err(line, column, "branch suffixes start at 1"));
            }
            (k, Some(n - 1))
        }
        None => (lhs, None),
    };
    Ok(Field {
        key,
        branch,
        bus,
        value,
    })
}

fn parse_pair(text: &str, line: usize, column: usize) -> Result<(usize, usize)> {
    let bad = || err(line, column, format!("expected a branch like 49-50, got '{text}'"));
    let (a, b) = text.split_once('-').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

fn parse_record(body: &str, line: usize) -> Result<SeriesDevice> {
    let mut tokens = Vec::new();
    let mut col = 0;
    for piece in body.split_inclusive(char::is_whitespace) {
        let tok = piece.trim();
        if !tok.is_empty() {
            let lead = piece.len() - piece.trim_start().len();
            tokens.push((tok, col + lead + 1));
        }
        col += piece.len();
    }
    let (kind, kind_col) = tokens[0];
    let (branches_text, branch_col) = *tokens
        .get(1)
        .ok_or_else(|| err(line, kind_col, "missing branch list"))?;
    let pairs = branches_text
        .split(',')
        .map(|p| parse_pair(p, line, branch_col))
        .collect::<Result<Vec<_>>>()?;
    let sending = pairs[0].0;
    if pairs.iter().any(|p| p.0 != sending) {
        return Err(err(line, branch_col, "all branches must share the sending bus"));
    }

    let n = pairs.len();
    let mut z_se = vec![DEFAULT_COUPLING; n];
    let mut v_max = vec![None; n];
    let mut init = vec![DEFAULT_INIT_CURRENT; n];
    let mut targets = Vec::new();
    for &(tok, column) in &tokens[2..] {
        let f = split_field(tok, column, line)?;
        let which: Vec<usize> = match f.branch {
            Some(b) if b >= n => return Err(err(line, column, format!("branch .{} out of range", b + 1))),
            Some(b) => vec![b],
            None => (0..n).collect(),
        };
        match f.key {
            "zse" | "init" => {
                let z = parse_complex(f.value)
                    .ok_or_else(|| err(line, column, format!("bad complex value '{}'", f.value)))?;
                for b in which {
                    if f.key == "zse" {
                        z_se[b] = z;
                    } else {
                        init[b] = z;
                    }
                }
            }
            "vse_max" => {
                let v: f64 = f
                    .value
                    .parse()
                    .map_err(|_| err(line, column, format!("bad number '{}'", f.value)))?;
                for b in which {
                    v_max[b] = Some(v);
                }
            }
            key => {
                let v: f64 = f
                    .value
                    .parse()
                    .map_err(|_| err(line, column, format!("bad number '{}'", f.value)))?;
                let mode = ControlMode::from_id(key, v, f.bus)
                    .ok_or_else(|| err(line, column, format!("unknown key '{key}'")))?;
                if f.bus.is_some() && key != "v_bus" {
                    return Err(err(line, column, "only v_bus takes a target bus"));
                }
                if n > 1 && f.branch.is_none() {
                    return Err(err(line, column, format!("IPFC target '{key}' needs a .k branch suffix")));
                }
                targets.push((f.branch.unwrap_or(0), mode, column));
            }
        }
    }

    let dev = match kind {
        "sssc" => {
            if n != 1 {
                return Err(err(line, branch_col, "an SSSC sits on exactly one branch"));
            }
            if targets.len() != 1 {
                return Err(err(line, kind_col, format!("an SSSC takes one control target, got {}", targets.len())));
            }
            SeriesDevice::Sssc(SsscDevice {
                from: sending,
                to: pairs[0].1,
                z_se: z_se[0],
                mode: targets[0].1,
                v_se_max: v_max[0],
                init_current: init[0],
            })
        }
        "ipfc" => SeriesDevice::Ipfc(IpfcDevice {
            sending,
            branches: (0..n)
                .map(|k| IpfcBranch {
                    to: pairs[k].1,
                    z_se: z_se[k],
                    v_se_max: v_max[k],
                    init_current: init[k],
                })
                .collect(),
            targets: targets
                .iter()
                .map(|&(branch, mode, _)| IpfcTarget { branch, mode })
                .collect(),
        }),
        other => return Err(err(line, kind_col, format!("unknown device type '{other}'"))),
    };
    dev.validate().map_err(|e| err(line, kind_col, e.to_string()))?;
    Ok(dev)
}

/// Parses a device file into devices in file order.
pub fn parse_devices(text: &str) -> Result<Vec<SeriesDevice>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        out.push(parse_record(body, k + 1)?);
    }
    Ok(out)
}
