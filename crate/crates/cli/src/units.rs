use casimir_core::config::QGrid;

/// Parse a gap such as `1um`, `500 nm`, `2e-6m` or `2e-6` (metres).
pub fn parse_distance(s: &str) -> Result<f64, String> {
    let s = s.trim();
    const UNITS: [(&str, f64); 6] = [
        ("nm", 1e-9),
        ("um", 1e-6),
        ("µm", 1e-6),
        ("μm", 1e-6),
        ("mm", 1e-3),
        ("m", 1.0),
    ];
    let (num, scale) = UNITS
        .iter()
        .find_map(|&(u, f)| s.strip_suffix(u).map(|n| (n, f)))
        .unwrap_or((s, 1.0));
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number with a length unit (m, mm, um or nm)"))?;
    let d = value * scale;
    if !(d > 0.0) || !d.is_finite() {
        return Err(format!("distance must be positive, got `{s}`"));
    }
    Ok(d)
}

/// Parse `MIN:MAX:STEP`.
pub fn parse_q_grid(s: &str) -> Result<QGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [min, max, step] = parts[..] else {
        return Err(format!("expected MIN:MAX:STEP, got `{s}`"));
    };
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{x}` is not a number"))
    };
    let g = QGrid {
        min: num(min)?,
        max: num(max)?,
        step: num(step)?,
    };
    g.values("--q-grid").map_err(|e| e.to_string())?;
    Ok(g)
}
