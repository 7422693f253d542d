use std::fmt;

use super::{ColorRef, PatternProgram, Primitive, SweepFrom};

impl fmt::Display for ColorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorRef::Param(name) => f.write_str(name),
            ColorRef::Literal(rgb) => write!(f, "{rgb}"),
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Solid { color } => write!(f, "solid({color})"),
            Primitive::Blink {
                color,
                period_ms,
                duty,
            } => write!(f, "blink({color}, {period_ms}ms, {duty})"),
            Primitive::Pulse {
                color,
                period_ms,
                min,
                max,
            } => write!(f, "pulse({color}, {period_ms}ms, {min}, {max})"),
            Primitive::Sweep {
                color,
                from,
                width_px,
                period_ms,
            } => {
                let from = match from {
                    SweepFrom::Left => "left",
                    SweepFrom::Right => "right",
                };
                write!(f, "sweep({color}, {from}, {width_px}, {period_ms}ms)")
            }
            Primitive::Segment { lo, hi, color } => write!(f, "segment([{lo}..{hi}], {color})"),
            Primitive::Off => f.write_str("off"),
        }
    }
}

/// Canonical source form; `parse` of the output yields the same program.
impl fmt::Display for PatternProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.name.replace('\\', "\\\\").replace('"', "\\\"");
        writeln!(f, "pattern \"{name}\" {{")?;
        for p in &self.params {
            writeln!(f, "  param color {} = {}", p.name, p.default)?;
        }
        writeln!(f, "  duration {}ms", self.duration_ms)?;
        for layer in &self.layers {
            writeln!(f, "  layer {layer}")?;
        }
        writeln!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use crate::pattern::parse;

    #[test]
    fn pretty_print_reparses() {
        let src = r#"pattern "q\"uote" { param color a = #0A0B0C duration 900ms
            layer pulse(a, 300, 0.125, 1) layer sweep(#FFFFFF, left, 2, 450) layer segment([0..6], a) layer off }"#;
        let p = parse(src).unwrap();
        let printed = p.to_string();
        assert!(printed.contains("layer pulse(a, 300ms, 0.125, 1)"));
        assert_eq!(parse(&printed).unwrap(), p);
    }
}
