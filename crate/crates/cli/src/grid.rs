//! Parsing of sweep grids such as `0:0.8:0.05,0.9`.

/// Expands comma-separated values and inclusive `start:stop:step` ranges, in order.
/// Range points are rounded to 12 decimals so `0.1 * 3` prints as `0.3`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        let num = |s: &str| -> Result<f64, String> {
            let v: f64 = s.trim().parse().map_err(|_| format!("bad grid value '{s}'"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("grid value '{s}' is not finite"))
            }
        };
        match fields.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, s] => {
                let (start, stop, step) = (num(a)?, num(b)?, num(s)?);
                if !(step > 0.0) {
                    return Err(format!("range step must be positive in '{part}'"));
                }
                let count = ((stop - start) / step + 1e-9).floor();
                if count < 0.0 {
                    return Err(format!("range '{part}' is empty"));
                }
                for i in 0..=count as u64 {
                    out.push(((start + i as f64 * step) * 1e12).round() / 1e12);
                }
            }
            _ => return Err(format!("grid entry '{part}' must be a value or start:stop:step")),
        }
    }
    if out.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(out)
}
