use ehmi::pattern::{Bindings, ColorRef, PatternProgram, Primitive, SweepFrom, PIXELS};
use rand::Rng;

/// Reference evaluator written from the pattern definitions: each pixel
/// takes the topmost layer that lights it at the layer's local time.
pub fn oracle(p: &PatternProgram, t: u64, bind: &Bindings, brightness: f64) -> [[u8; 3]; PIXELS] {
    let color = |c: &ColorRef| -> [f64; 3] {
        let rgb = match c {
            ColorRef::Literal(rgb) => *rgb,
            ColorRef::Param(n) => bind
                .get(n)
                .copied()
                .unwrap_or_else(|| p.params.iter().find(|q| &q.name == n).unwrap().default),
        };
        [rgb.r as f64, rgb.g as f64, rgb.b as f64]
    };
    let phase = t % p.duration_ms;
    let b = if brightness.is_nan() { 0.0 } else { brightness.clamp(0.0, 1.0) };
    let mut out = [[0u8; 3]; PIXELS];
    for (i, px) in out.iter_mut().enumerate() {
        let lit = p.layers.iter().rev().find_map(|layer| -> Option<[f64; 3]> {
            match layer {
                Primitive::Off => None,
                Primitive::Solid { color: c } => Some(color(c)),
                Primitive::Segment { lo, hi, color: c } => (*lo as usize..=*hi as usize).contains(&i).then(|| color(c)),
                Primitive::Blink { color: c, period_ms, duty } => {
                    (((phase % period_ms) as f64) < duty * *period_ms as f64).then(|| color(c))
                }
                Primitive::Pulse { color: c, period_ms, min, max } => {
                    let u = (phase % period_ms) as f64 / *period_ms as f64;
                    let tri = if u <= 0.5 { 2.0 * u } else { 2.0 - 2.0 * u };
                    let level = min + (max - min) * tri;
                    Some(color(c).map(|v| v * level))
                }
                Primitive::Sweep { color: c, from, width_px, period_ms } => {
                    let head = (phase % period_ms) * PIXELS as u64 / period_ms;
                    let pos = match from {
                        SweepFrom::Left => i as u64,
                        SweepFrom::Right => (PIXELS - 1 - i) as u64,
                    };
                    (pos >= head && pos < head + *width_px as u64).then(|| color(c))
                }
            }
        });
        if let Some(v) = lit {
            // inputs are non-negative, so floor(x + 0.5) rounds half away from zero
            *px = v.map(|c| (c * b + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Source text for a random but valid program.
pub fn random_source(rng: &mut impl Rng) -> String {
    let n_params = rng.random_range(1..=3);
    let params: Vec<String> = (0..n_params).map(|i| format!("p{i}")).collect();
    let mut s = String::from("pattern \"rand\" {\n");
    for p in &params {
        s += &format!("  param color {p} = #{:06X}\n", rng.random_range(0..=0xFFFFFFu32));
    }
    s += &format!("  duration {}ms\n", rng.random_range(1..=5000u32));
    for _ in 0..rng.random_range(1..=4) {
        let c = if rng.random_bool(0.8) {
            params[rng.random_range(0..params.len())].clone()
        } else {
            format!("#{:06X}", rng.random_range(0..=0xFFFFFFu32))
        };
        let period = rng.random_range(1..=3000u32);
        let layer = match rng.random_range(0..6) {
            0 => format!("solid({c})"),
            1 => format!("blink({c}, {period}ms, {:.3})", rng.random_range(0.001..=1.0f64)),
            2 => {
                let a = rng.random_range(0.0..=1.0f64);
                let b = rng.random_range(0.0..=1.0f64);
                format!("pulse({c}, {period}ms, {:.3}, {:.3})", a.min(b), a.max(b))
            }
            3 => format!(
                "sweep({c}, {}, {}, {period}ms)",
                if rng.random_bool(0.5) { "left" } else { "right" },
                rng.random_range(1..=21)
            ),
            4 => {
                let lo = rng.random_range(0..=20);
                format!("segment([{lo}..{}], {c})", rng.random_range(lo..=20))
            }
            _ => "off".to_owned(),
        };
        s += &format!("  layer {layer}\n");
    }
    s + "}\n"
}
