//! Flag value parsers.

use num_complex::Complex64;

/// A point `s` whose real part may be the symbolic line abscissa `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SPoint {
    /// `None` stands for `c`.
    pub re: Option<f64>,
    pub im: f64,
}

impl SPoint {
    pub fn resolve(self, c: f64) -> Complex64 {
        Complex64::new(self.re.unwrap_or(c), self.im)
    }
}

fn parse_real_part(text: &str) -> Result<Option<f64>, String> {
    match text {
        "c" | "+c" => Ok(None),
        _ => text
            .parse::<f64>()
            .map(Some)
            .map_err(|_| format!("bad real part `{text}`")),
    }
}

fn parse_imag_coefficient(text: &str) -> Result<f64, String> {
    match text {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => text
            .parse::<f64>()
            .map_err(|_| format!("bad imaginary part `{text}i`")),
    }
}

/// Accepts `c`, `0.5`, `3i`, `c+5i`, `0.1-2.5i`, `1e-3+1e2i`.
pub fn parse_s(text: &str) -> Result<SPoint, String> {
    let t: String = text.chars().filter(|ch| !ch.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty value for s".into());
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(SPoint {
            re: parse_real_part(&t)?,
            im: 0.0,
        });
    };
    // last sign that is neither leading nor part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(SPoint {
            re: parse_real_part(&body[..k])?,
            im: parse_imag_coefficient(&body[k..])?,
        }),
        None => Ok(SPoint {
            re: Some(0.0),
            im: parse_imag_coefficient(body)?,
        }),
    }
}

/// Sorted-as-given list of reals, or `auto`.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Auto,
    Points(Vec<f64>),
}

pub fn parse_grid(text: &str) -> Result<Grid, String> {
    if text == "auto" {
        return Ok(Grid::Auto);
    }
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad grid point `{p}`"))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Grid::Points)
}
