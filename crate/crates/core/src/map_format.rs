//! Text format for piecewise linear maps (`.map`).
//!
//! ```text
//! # optional comments
//! interval 0 1
//! breakpoints: 0, 1/2, 1
//! values: 0, 1, 0
//! ```
//!
//! Scalars are `p/q` rationals or decimal literals (read exactly as
//! `p/10^k`). The parser enforces every map invariant and reports the
//! first violated one.

use crate::error::{Error, Result};
use crate::map::PLMap;
use crate::scalar::{format_scalar, parse_scalar, Scalar};

/// Parses the `.map` format.
pub fn parse_map(text: &str) -> Result<PLMap> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, raw)| {
            let body = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            (i + 1, body.trim())
        })
        .filter(|(_, body)| !body.is_empty());

    let (ln_a, interval) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing `interval` line".into() })?;
    let rest = interval.strip_prefix("interval").ok_or_else(|| Error::Parse {
        line: ln_a,
        msg: "expected `interval <a> <b>`".into(),
    })?;
    let ends: Vec<&str> = rest.split_whitespace().collect();
    if ends.len() != 2 {
        return Err(Error::Parse {
            line: ln_a,
            msg: "expected `interval <a> <b>`".into(),
        });
    }
    let a = scalar_at(ends[0], ln_a)?;
    let b = scalar_at(ends[1], ln_a)?;

    let (ln_b, xs) = field(&mut lines, "breakpoints")?;
    let xs = scalar_list(xs, ln_b)?;
    let (ln_v, ys) = field(&mut lines, "values")?;
    let ys = scalar_list(ys, ln_v)?;

    if let Some((line, body)) = lines.next() {
        return Err(Error::Parse {
            line,
            msg: format!("unexpected trailing content `{body}`"),
        });
    }
    if xs.first() != Some(&a) || xs.last() != Some(&b) {
        return Err(Error::Parse {
            line: ln_b,
            msg: "breakpoints must start at a and end at b".into(),
        });
    }
    PLMap::new(xs, ys).map_err(|e| Error::Parse {
        line: ln_v,
        msg: e.to_string(),
    })
}

/// Writes the `.map` format; output is deterministic and exact.
pub fn write_map(map: &PLMap) -> String {
    let join = |xs: &[Scalar]| {
        xs.iter()
            .map(format_scalar)
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "interval {} {}\nbreakpoints: {}\nvalues: {}\n",
        format_scalar(map.a()),
        format_scalar(map.b()),
        join(map.breakpoints()),
        join(map.values()),
    )
}

fn field<'a, I: Iterator<Item = (usize, &'a str)>>(
    lines: &mut I,
    name: &str,
) -> Result<(usize, &'a str)> {
    let (line, body) = lines.next().ok_or_else(|| Error::Parse {
        line: 0,
        msg: format!("missing `{name}:` line"),
    })?;
    let rest = body.strip_prefix(name).and_then(|r| r.trim_start().strip_prefix(':'));
    match rest {
        Some(r) => Ok((line, r)),
        None => Err(Error::Parse {
            line,
            msg: format!("expected `{name}: …`"),
        }),
    }
}

fn scalar_at(text: &str, line: usize) -> Result<Scalar> {
    parse_scalar(text).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

fn scalar_list(text: &str, line: usize) -> Result<Vec<Scalar>> {
    text.split(',')
        .map(|s| scalar_at(s, line))
        .collect::<Result<Vec<_>>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    #[test]
    fn parse_simple_map() {
        let m = parse_map("# tent\ninterval 0 1\nbreakpoints: 0, 1/2, 1\nvalues: 0, 1, 0\n")
            .unwrap();
        assert_eq!(m.lap_count(), 2);
        assert_eq!(m.turning_points(), vec![ratio(1, 2)]);
    }

    #[test]
    fn decimals_parse_exactly() {
        let m = parse_map("interval 0 1\nbreakpoints: 0, 0.5, 1\nvalues: 0, 0.75, 0\n").unwrap();
        assert_eq!(m.eval(&ratio(1, 2)).unwrap(), ratio(3, 4));
    }

    #[test]
    fn roundtrip_is_identity() {
        let m = PLMap::new(
            vec![int(0), ratio(3, 20), ratio(2, 5), int(1)],
            vec![ratio(1, 20), ratio(19, 20), ratio(1, 10), ratio(9, 10)],
        )
        .unwrap();
        let text = write_map(&m);
        assert_eq!(parse_map(&text).unwrap(), m);
        assert_eq!(write_map(&parse_map(&text).unwrap()), text);
    }

    #[test]
    fn errors_name_the_violation() {
        let e = parse_map("interval 0 1\nbreakpoints: 0, 1\nvalues: 0, 2\n").unwrap_err();
        assert!(e.to_string().contains("outside the interval"));
        let e = parse_map("interval 0 1\nbreakpoints: 0, 1/2, 1\nvalues: 0, 1/2, 1\n")
            .unwrap_err();
        assert!(e.to_string().contains("collinear"));
        let e = parse_map("interval 0 2\nbreakpoints: 0, 1\nvalues: 0, 1\n").unwrap_err();
        assert!(e.to_string().contains("start at a and end at b"));
        let e = parse_map("nonsense\n").unwrap_err();
        assert!(e.to_string().contains("interval"));
    }
}
