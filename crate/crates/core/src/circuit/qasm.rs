//! Minimal OpenQASM 2.0 front end and emitter.
//!
//! Accepted: one quantum register, `qelib1.inc` gates h x y z s sdg t tdg rx
//! ry rz p/u1 u/u3 u2 cx cz cp/cu1 ccx swap id, plus `barrier` and `creg`
//! declarations which are ignored. `ccx` and `swap` are expanded into the
//! native vocabulary.

use std::f64::consts::PI;
use std::fmt::Write as _;

use super::{CircuitIR, GateKind};
use crate::error::{Error, Result};

/// Denominators up to this value are written as multiples of `pi`.
pub const MAX_PI_DENOMINATOR: i64 = 16;

pub fn parse_qasm(text: &str) -> Result<CircuitIR> {
    let mut parser = Parser { circuit: None, register: None };
    for (line, stmt) in statements(text)? {
        parser.statement(line, &stmt)?;
    }
    match parser.circuit {
        Some(c) => Ok(c),
        None => Err(Error::Qasm { line: text.lines().count().max(1), message: "no qreg declared".into() }),
    }
}

/// Splits into `;`-terminated statements tagged with their starting line.
fn statements(text: &str) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("");
        for ch in line.chars() {
            if current.trim().is_empty() && !ch.is_whitespace() {
                start = i + 1;
            }
            if ch == ';' {
                out.push((start, current.trim().to_string()));
                current.clear();
            } else {
                current.push(ch);
            }
        }
        current.push(' ');
    }
    if !current.trim().is_empty() {
        return Err(Error::Qasm { line: start, message: "missing ';'".into() });
    }
    Ok(out)
}

struct Parser {
    circuit: Option<CircuitIR>,
    register: Option<String>,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Qasm { line, message: message.into() })
}

impl Parser {
    fn statement(&mut self, line: usize, stmt: &str) -> Result<()> {
        if stmt.is_empty() {
            return Ok(());
        }
        let head: String = stmt.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
        match head.as_str() {
            "OPENQASM" => {
                let version = stmt["OPENQASM".len()..].trim();
                if !version.starts_with('2') {
                    return err(line, format!("unsupported OpenQASM version {version}"));
                }
                Ok(())
            }
            "include" => Ok(()),
            "qreg" => self.qreg(line, stmt),
            "creg" | "barrier" => Ok(()),
            "measure" | "reset" | "if" => err(line, format!("classical operation '{head}' not supported")),
            "gate" | "opaque" => err(line, "custom gate definitions are not supported"),
            "" => err(line, format!("syntax error near '{stmt}'")),
            _ => self.gate(line, &head, stmt[head.len()..].trim()),
        }
    }

    fn qreg(&mut self, line: usize, stmt: &str) -> Result<()> {
        if self.register.is_some() {
            return err(line, "only a single quantum register is supported");
        }
        let (name, size) = parse_indexed(line, stmt["qreg".len()..].trim())?;
        let circuit = CircuitIR::new(size).map_err(|e| Error::Qasm { line, message: e.to_string() })?;
        self.register = Some(name);
        self.circuit = Some(circuit);
        Ok(())
    }

    fn gate(&mut self, line: usize, name: &str, rest: &str) -> Result<()> {
        let (params, operands) = if let Some(inner) = rest.strip_prefix('(') {
            let close = matching_paren(inner).ok_or(Error::Qasm { line, message: "unbalanced '('".into() })?;
            let args = split_top_level(&inner[..close])
                .iter()
                .map(|e| eval_expr(e).map_err(|m| Error::Qasm { line, message: m }))
                .collect::<Result<Vec<f64>>>()?;
            (args, inner[close + 1..].trim())
        } else {
            (Vec::new(), rest)
        };
        let register = self.register.clone().ok_or(Error::Qasm { line, message: "gate before qreg".into() })?;
        let qubits = operands
            .split(',')
            .map(|op| {
                let (reg, idx) = parse_indexed(line, op.trim())?;
                if reg != register {
                    return err(line, format!("unknown register '{reg}'"));
                }
                Ok(idx)
            })
            .collect::<Result<Vec<usize>>>()?;
        let c = self.circuit.as_mut().expect("register implies circuit");
        let wrap = |r: Result<()>| r.map_err(|e| Error::Qasm { line, message: e.to_string() });

        let expect = |np: usize, nq: usize| -> Result<()> {
            if params.len() != np {
                return err(line, format!("'{name}' takes {np} parameters, got {}", params.len()));
            }
            if qubits.len() != nq {
                return err(line, format!("'{name}' takes {nq} qubits, got {}", qubits.len()));
            }
            Ok(())
        };
        match name {
            "h" | "x" | "y" | "z" | "s" | "sdg" | "t" | "tdg" => {
                expect(0, 1)?;
                wrap(c.push(name.parse()?, &qubits))
            }
            "id" => expect(0, 1),
            "cx" | "CX" | "cz" => {
                expect(0, 2)?;
                wrap(c.push(name.parse()?, &qubits))
            }
            "rx" | "ry" | "rz" | "p" | "u1" => {
                expect(1, 1)?;
                let kind = if name == "u1" { GateKind::P } else { name.parse()? };
                wrap(c.push_param(kind, &qubits, params[0]).map(drop))
            }
            "cp" | "cu1" => {
                expect(1, 2)?;
                wrap(c.push_param(GateKind::CP, &qubits, params[0]).map(drop))
            }
            "u" | "u3" | "U" => {
                expect(3, 1)?;
                wrap(push_u3(c, qubits[0], params[0], params[1], params[2]))
            }
            "u2" => {
                expect(2, 1)?;
                wrap(push_u3(c, qubits[0], PI / 2.0, params[0], params[1]))
            }
            "swap" => {
                expect(0, 2)?;
                let (a, b) = (qubits[0], qubits[1]);
                wrap((|| {
                    c.push(GateKind::CX, &[a, b])?;
                    c.push(GateKind::CX, &[b, a])?;
                    c.push(GateKind::CX, &[a, b])
                })())
            }
            "ccx" => {
                expect(0, 3)?;
                wrap(push_ccx(c, qubits[0], qubits[1], qubits[2]))
            }
            other => err(line, format!("unsupported gate '{other}'")),
        }
    }
}

/// `u3(theta, phi, lambda) = RZ(phi) RY(theta) RZ(lambda)` up to global phase.
fn push_u3(c: &mut CircuitIR, q: usize, theta: f64, phi: f64, lambda: f64) -> Result<()> {
    c.push_param(GateKind::RZ, &[q], lambda)?;
    c.push_param(GateKind::RY, &[q], theta)?;
    c.push_param(GateKind::RZ, &[q], phi)?;
    Ok(())
}

/// Six-CNOT Toffoli with controls `a`, `b` and target `t`.
fn push_ccx(c: &mut CircuitIR, a: usize, b: usize, t: usize) -> Result<()> {
    use GateKind::*;
    let seq: [(GateKind, &[usize]); 15] = [
        (H, &[t]),
        (CX, &[b, t]),
        (Tdg, &[t]),
        (CX, &[a, t]),
        (T, &[t]),
        (CX, &[b, t]),
        (Tdg, &[t]),
        (CX, &[a, t]),
        (T, &[b]),
        (T, &[t]),
        (H, &[t]),
        (CX, &[a, b]),
        (T, &[a]),
        (Tdg, &[b]),
        (CX, &[a, b]),
    ];
    for (kind, qs) in seq {
        c.push(kind, qs)?;
    }
    Ok(())
}

fn parse_indexed(line: usize, s: &str) -> Result<(String, usize)> {
    let open = s.find('[').ok_or(Error::Qasm { line, message: format!("expected 'name[index]', got '{s}'") })?;
    let close = s.rfind(']').filter(|&c| c > open && s[c + 1..].trim().is_empty());
    let close = close.ok_or(Error::Qasm { line, message: format!("malformed index in '{s}'") })?;
    let name = s[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return err(line, format!("invalid identifier '{name}'"));
    }
    let idx = s[open + 1..close]
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Qasm { line, message: format!("invalid index in '{s}'") })?;
    Ok((name.to_string(), idx))
}

fn matching_paren(s: &str) -> Option<usize> {
    let mut depth = 1usize;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Evaluates a QASM parameter expression (`pi`, numbers, `+ - * / ^`,
/// parentheses, and sin/cos/tan/exp/ln/sqrt).
pub fn eval_expr(s: &str) -> std::result::Result<f64, String> {
    let tokens = tokenize(s)?;
    let mut p = ExprParser { tokens: &tokens, pos: 0 };
    let v = p.expr()?;
    if p.pos != tokens.len() {
        return Err(format!("trailing input in expression '{s}'"));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> std::result::Result<Vec<Tok>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(text.parse().map_err(|_| format!("invalid number '{text}'"))?));
        } else if ch.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(ch) {
            out.push(Tok::Op(ch));
            i += 1;
        } else {
            return Err(format!("unexpected character '{ch}' in expression"));
        }
    }
    Ok(out)
}

struct ExprParser<'a> {
    tokens: &'a [Tok],
    pos: usize,
}

impl ExprParser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            v = if op == '+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn term(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            v = if op == '*' { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn unary(&mut self) -> std::result::Result<f64, String> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => {
                let base = self.primary()?;
                if self.peek_op() == Some('^') {
                    self.pos += 1;
                    let exp = self.unary()?;
                    return Ok(base.powf(exp));
                }
                Ok(base)
            }
        }
    }

    fn primary(&mut self) -> std::result::Result<f64, String> {
        let tok = self.tokens.get(self.pos).cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(v),
            Tok::Op('(') => {
                let v = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err("expected ')'".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Tok::Ident(name) if name == "pi" => Ok(PI),
            Tok::Ident(name) => {
                let f: fn(f64) -> f64 = match name.as_str() {
                    "sin" => f64::sin,
                    "cos" => f64::cos,
                    "tan" => f64::tan,
                    "exp" => f64::exp,
                    "ln" => f64::ln,
                    "sqrt" => f64::sqrt,
                    _ => return Err(format!("unknown identifier '{name}'")),
                };
                if self.peek_op() != Some('(') {
                    return Err(format!("expected '(' after {name}"));
                }
                self.pos += 1;
                let v = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err("expected ')'".into());
                }
                self.pos += 1;
                Ok(f(v))
            }
            Tok::Op(c) => Err(format!("unexpected '{c}'")),
        }
    }
}

/// `Some((p, q))` when `angle` is `p*pi/q` with `q <= max_den`, in lowest terms.
pub fn as_pi_fraction(angle: f64, max_den: i64) -> Option<(i64, i64)> {
    let x = angle / PI;
    (1..=max_den).find_map(|q| {
        let p = (x * q as f64).round();
        ((x - p / q as f64).abs() <= 1e-13 * (1.0 + x.abs()) && p.abs() < 1e15).then_some((p as i64, q))
    })
}

/// Angle literal: a `pi` fraction when exact with a small denominator,
/// otherwise 17 significant digits.
pub fn format_angle(angle: f64) -> String {
    match as_pi_fraction(angle, MAX_PI_DENOMINATOR) {
        Some((0, _)) => "0".into(),
        Some((p, 1)) => match p {
            1 => "pi".into(),
            -1 => "-pi".into(),
            _ => format!("{p}*pi"),
        },
        Some((p, q)) => match p {
            1 => format!("pi/{q}"),
            -1 => format!("-pi/{q}"),
            _ => format!("{p}*pi/{q}"),
        },
        None => format!("{angle:.16e}"),
    }
}

/// OpenQASM 2.0 text for `c` at the given angles.
pub fn emit_qasm(c: &CircuitIR, params: &[f64]) -> Result<String> {
    c.check_params(params)?;
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", c.num_qubits());
    for g in c.gates() {
        let operands = g.qubits.iter().map(|q| format!("q[{q}]")).collect::<Vec<_>>().join(",");
        match g.slot {
            Some(s) => {
                let _ = writeln!(out, "{}({}) {};", g.kind.qasm_name(), format_angle(params[s]), operands);
            }
            None => {
                let _ = writeln!(out, "{} {};", g.kind.qasm_name(), operands);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin_target, TargetName};
    use crate::losses::hs_distance;
    use crate::tensor::{Matrix, C64};
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn bell_pair() {
        let c = parse_qasm("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\nh q[0];\ncx q[0],q[1];\n").unwrap();
        // Hand computation: CX (H (x) I), basis |q0 q1>.
        let h = FRAC_1_SQRT_2;
        let rows = [
            [h, 0.0, h, 0.0],
            [0.0, h, 0.0, h],
            [0.0, h, 0.0, -h],
            [h, 0.0, -h, 0.0],
        ];
        let expected = Matrix::from_fn(2, |r, c| C64::new(rows[r][c], 0.0));
        assert!(c.unitary().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn ccx_expansion_is_toffoli() {
        let c = parse_qasm("OPENQASM 2.0; qreg q[3]; ccx q[0],q[1],q[2];").unwrap();
        let u = c.unitary();
        let target = builtin_target(TargetName::CnX, 3).unwrap();
        assert!(hs_distance(&u, &target).unwrap() < 1e-14);
    }

    #[test]
    fn swap_expansion() {
        let c = parse_qasm("qreg q[2]; x q[0]; swap q[0],q[1];").unwrap();
        // |00> -> X on q0 -> |10> -> swap -> |01>
        assert!((c.unitary().get(1, 0).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_body_is_identity() {
        let c = parse_qasm("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\n").unwrap();
        assert!(c.gates().is_empty());
        assert_eq!(c.unitary(), Matrix::identity(3));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_qasm("OPENQASM 2.0;\nqreg q[2];\nfoo q[0];\n").unwrap_err();
        assert!(matches!(e, Error::Qasm { line: 3, .. }), "{e}");
        let e = parse_qasm("qreg q[2];\ncreg c[2];\n\nmeasure q[0] -> c[0];\n").unwrap_err();
        assert!(matches!(e, Error::Qasm { line: 4, .. }), "{e}");
        let e = parse_qasm("qreg q[2];\nh q[0]\n").unwrap_err();
        assert!(matches!(e, Error::Qasm { line: 2, .. }), "{e}");
        assert!(parse_qasm("qreg q[2];\nrx(pi q[0];").is_err());
        assert!(parse_qasm("qreg q[2];\nh r[0];").is_err());
        assert!(parse_qasm("qreg q[2];\nqreg r[2];").is_err());
        assert!(parse_qasm("h q[0];").is_err());
        assert!(parse_qasm("qreg q[2];\ncx q[0];").is_err());
    }

    #[test]
    fn expressions() {
        assert!((eval_expr("pi/4").unwrap() - PI / 4.0).abs() < 1e-16);
        assert!((eval_expr("-3*pi/4").unwrap() + 3.0 * PI / 4.0).abs() < 1e-15);
        assert!((eval_expr("2^3 - (1 + 1)").unwrap() - 6.0).abs() < 1e-15);
        assert!((eval_expr("cos(0) + 1.5e-1").unwrap() - 1.15).abs() < 1e-15);
        assert!(eval_expr("foo(1)").is_err());
        assert!(eval_expr("1 +").is_err());
    }

    #[test]
    fn u3_matches_definition() {
        let (t, p, l) = (0.4_f64, 1.1_f64, -0.6_f64);
        let c = parse_qasm(&format!("qreg q[1]; u3({t},{p},{l}) q[0];")).unwrap();
        let (ct, st) = ((t / 2.0).cos(), (t / 2.0).sin());
        let expected = Matrix::from_fn(1, |r, col| match (r, col) {
            (0, 0) => C64::new(ct, 0.0),
            (0, 1) => -C64::from_polar(st, l),
            (1, 0) => C64::from_polar(st, p),
            _ => C64::from_polar(ct, p + l),
        });
        assert!(hs_distance(&c.unitary(), &expected).unwrap() < 1e-14);
    }

    #[test]
    fn angle_literals() {
        assert_eq!(format_angle(PI / 4.0), "pi/4");
        assert_eq!(format_angle(-3.0 * PI / 8.0), "-3*pi/8");
        assert_eq!(format_angle(PI), "pi");
        assert_eq!(format_angle(0.0), "0");
        assert_eq!(format_angle(2.0 * PI), "2*pi");
        assert!(!format_angle(PI / 17.0).contains("pi"));
        let a = 0.123_456_789_012_345_67_f64;
        let text = format_angle(a);
        assert_eq!(eval_expr(&text).unwrap().to_bits(), a.to_bits());
    }

    #[test]
    fn rational_literals_round_trip() {
        let mut c = CircuitIR::new(2).unwrap();
        for (i, q) in [1, 2, 3, 4, 8, 16].into_iter().enumerate() {
            c.push_param(GateKind::RZ, &[i % 2], (i as f64 + 1.0) * PI / q as f64).unwrap();
        }
        c.push_param(GateKind::CP, &[0, 1], -PI / 2.0).unwrap();
        let text = emit_qasm(&c, c.params()).unwrap();
        assert!(!text.contains("rz(pi/1)") && !text.contains("rz(3*pi/3)"));
        assert!(text.contains("rz(pi)") && text.contains("rz(5*pi/8)") && text.contains("cp(-pi/2)"));
        let back = parse_qasm(&text).unwrap();
        assert!(back.unitary().max_abs_diff(&c.unitary()) < 1e-12);
    }
}
