//! Canonical CSV schema: header `x1,...,xd,t,delta`, `delta` in {0, 1},
//! lines starting with `#` are comments.

use std::io::{Read, Write};
use std::path::Path;

use cindex_core::ObservedTriple;

use crate::error::{CliError, CliResult};

/// 17 significant digits: parsing the text gives back the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_triples(path: &Path) -> CliResult<Vec<ObservedTriple>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    parse_triples(file)
}

pub fn parse_triples(input: impl Read) -> CliResult<Vec<ObservedTriple>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Schema(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Schema("missing header".into()));
    }
    let d = check_header(&header)?;

    let mut data = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Schema(e.to_string()))?;
        let line = rec.position().map_or(k + 2, |p| p.line() as usize);
        if rec.len() != d + 2 {
            return Err(CliError::Schema(format!("line {line}: expected {} fields, found {}", d + 2, rec.len())));
        }
        let num = |i: usize| -> CliResult<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| CliError::Schema(format!("line {line}: column {} is not a number: {:?}", header[i], &rec[i])))?;
            if !v.is_finite() {
                return Err(CliError::Schema(format!("line {line}: column {} is not finite", header[i])));
            }
            Ok(v)
        };
        let x = (0..d).map(num).collect::<CliResult<Vec<f64>>>()?;
        let t = num(d)?;
        let delta = match &rec[d + 1] {
            "1" => true,
            "0" => false,
            other => return Err(CliError::Schema(format!("line {line}: delta must be 0 or 1, got {other:?}"))),
        };
        data.push(ObservedTriple::new(x, t, delta));
    }
    if data.is_empty() {
        return Err(CliError::Schema("no data rows".into()));
    }
    Ok(data)
}

fn check_header(header: &[String]) -> CliResult<usize> {
    let n = header.len();
    if n < 3 {
        return Err(CliError::Schema(format!("header needs x1..xd,t,delta, got {}", header.join(","))));
    }
    let d = n - 2;
    for (i, name) in header[..d].iter().enumerate() {
        if *name != format!("x{}", i + 1) {
            return Err(CliError::Schema(format!("column {} should be x{}, got {name:?}", i + 1, i + 1)));
        }
    }
    if header[d] != "t" || header[d + 1] != "delta" {
        return Err(CliError::Schema(format!("last columns should be t,delta, got {},{}", header[d], header[d + 1])));
    }
    Ok(d)
}

pub fn write_triples(out: impl Write, data: &[ObservedTriple], comments: &[String]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let d = data.first().map_or(0, |o| o.x.len());
    let mut wtr = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["t".into(), "delta".into()]).collect();
    wtr.write_record(&header)?;
    for o in data {
        let row: Vec<String> = o
            .x
            .iter()
            .map(|v| format_f64(*v))
            .chain([format_f64(o.t), if o.delta { "1".into() } else { "0".into() }])
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let data = vec![
            ObservedTriple::new(vec![0.1, 1.0 / 3.0], std::f64::consts::PI, true),
            ObservedTriple::new(vec![-1e-300, 2.5e17], -0.7, false),
        ];
        let mut buf = Vec::new();
        write_triples(&mut buf, &data, &["seed=1".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed=1\nx1,x2,t,delta\n"));
        assert_eq!(parse_triples(&buf[..]).unwrap(), data);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_triples(&b""[..]), Err(CliError::Schema(_))));
        assert!(matches!(parse_triples(&b"x1,t,delta\n"[..]), Err(CliError::Schema(_))));
        assert!(matches!(parse_triples(&b"x1,y,delta\n1,2,1\n"[..]), Err(CliError::Schema(_))));
        assert!(matches!(parse_triples(&b"x1,t,delta\n1,2,2\n"[..]), Err(CliError::Schema(_))));
        assert!(matches!(parse_triples(&b"x1,t,delta\n1,2\n"[..]), Err(CliError::Schema(_))));
        assert!(matches!(parse_triples(&b"x1,t,delta\n1,abc,1\n"[..]), Err(CliError::Schema(_))));
    }

    #[test]
    fn comments_and_spaces_are_ignored() {
        let text = b"# generated\nx1, t, delta\n0.5, 1.25, 1\n# note\n0.25, 2, 0\n";
        let data = parse_triples(&text[..]).unwrap();
        assert_eq!(data, vec![ObservedTriple::new(vec![0.5], 1.25, true), ObservedTriple::new(vec![0.25], 2.0, false)]);
    }
}
