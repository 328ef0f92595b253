//! Value parsers for layer grids, theta grids and spans.

use std::ops::Range;

/// `a..b` (exclusive), `a..=b` (inclusive), `a,b,c` or a single layer.
pub fn parse_layers(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad layer {t:?} in {s:?}"));
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(format!("layer range {s:?} is empty"));
    }
    Ok(out)
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// `start:stop:step` (stop included when it lies on the grid), `a,b,c` or a
/// single value.
pub fn parse_thetas(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("bad theta {t:?} in {s:?}"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                return Err(format!("theta grid {s:?} needs start <= stop and step > 0"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| round12(start + i as f64 * step)).collect()
        }
        [single] => single.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("theta grid {s:?} is not start:stop:step")),
    };
    Ok(out)
}

/// `--sweep layers=... thetas=...`.
#[derive(Debug, Default, PartialEq)]
pub struct SweepSpec {
    pub layers: Option<Vec<usize>>,
    pub thetas: Option<Vec<f64>>,
}

pub fn parse_sweep(items: &[String]) -> Result<SweepSpec, String> {
    let mut spec = SweepSpec::default();
    for item in items {
        match item.split_once('=') {
            Some(("layers", v)) => spec.layers = Some(parse_layers(v)?),
            Some(("thetas", v)) => spec.thetas = Some(parse_thetas(v)?),
            _ => return Err(format!("unknown sweep item {item:?}; expected layers=... or thetas=...")),
        }
    }
    Ok(spec)
}

/// `s:e` with `s < e`.
pub fn parse_span(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("span {s:?} is not s:e"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad span start in {s:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad span end in {s:?}"))?;
    if a >= b {
        return Err(format!("span {s:?} is empty"));
    }
    Ok(a..b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers() {
        assert_eq!(parse_layers("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_layers("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_layers("4").unwrap(), vec![4]);
        assert_eq!(parse_layers("2,5").unwrap(), vec![2, 5]);
        assert!(parse_layers("3..3").is_err());
        assert!(parse_layers("x").is_err());
    }

    #[test]
    fn thetas() {
        let t = parse_thetas("0.30:0.95:0.05").unwrap();
        assert_eq!(t.len(), 14);
        assert_eq!(t[0], 0.3);
        assert_eq!(t[13], 0.95);
        assert_eq!(t[1], 0.35);
        assert_eq!(parse_thetas("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_thetas("0.1:0.25:0.1").unwrap(), vec![0.1, 0.2]);
        assert!(parse_thetas("0.5:0.1:0.1").is_err());
        assert!(parse_thetas("0:1:0").is_err());
        assert!(parse_thetas("nan").is_err());
    }

    #[test]
    fn sweep_and_span() {
        let s = parse_sweep(&["layers=0..2".into(), "thetas=0.5,0.6".into()]).unwrap();
        assert_eq!(s.layers, Some(vec![0, 1]));
        assert_eq!(s.thetas, Some(vec![0.5, 0.6]));
        assert!(parse_sweep(&["depth=3".into()]).is_err());
        assert_eq!(parse_span("12:18").unwrap(), 12..18);
        assert!(parse_span("5:5").is_err());
        assert!(parse_span("5").is_err());
    }
}
