//! Text form of model specifications, e.g. `normal(mu=0,sigma=1)`,
//! `t(nu=4)`, `product(gamma(2,2),gamma(2,2))` or
//! `binomial(trials=innings,prob=0.13)` where `innings` names a data column.

use super::DistributionModel;
use crate::error::{Error, Result};

/// A parameter value: a literal, a data-column reference, or a nested model.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Number(f64),
    Column(String),
    Model(ModelSpec),
}

/// Parsed but unresolved model specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: String,
    pub args: Vec<(Option<String>, Param)>,
}

impl ModelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            src: text,
            bytes: text.as_bytes(),
            pos: 0,
        };
        let spec = p.model()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.err("trailing input"));
        }
        Ok(spec)
    }

    /// Names of data columns referenced anywhere in the spec.
    pub fn columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (_, arg) in &self.args {
            match arg {
                Param::Column(c) => out.push(c.clone()),
                Param::Model(m) => out.extend(m.columns()),
                Param::Number(_) => {}
            }
        }
        out
    }

    /// Resolves column references through `lookup` and builds the model.
    pub fn build(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<DistributionModel> {
        let err = |reason: String| Error::ModelSpec {
            spec: self.to_string(),
            reason,
        };
        let family = self.family.to_ascii_lowercase();
        if family == "product" {
            let mut parts = Vec::with_capacity(self.args.len());
            for (name, arg) in &self.args {
                match (name, arg) {
                    (None, Param::Model(m)) => parts.push(m.build(lookup)?),
                    _ => return Err(err("product takes only positional models".into())),
                }
            }
            return DistributionModel::product(parts);
        }

        let (names, defaults): (&[&str], &[Option<f64>]) = match family.as_str() {
            "normal" | "norm" | "gaussian" => (&["mu", "sigma"], &[Some(0.0), Some(1.0)]),
            "t" | "student_t" | "studentt" => {
                (&["nu", "loc", "scale"], &[None, Some(0.0), Some(1.0)])
            }
            "gamma" => (&["shape", "rate"], &[None, None]),
            "binomial" | "binom" => (&["trials", "prob"], &[None, None]),
            other => return Err(err(format!("unknown family `{other}`"))),
        };

        let mut values: Vec<Option<f64>> = defaults.to_vec();
        let mut seen = vec![false; names.len()];
        for (i, (name, arg)) in self.args.iter().enumerate() {
            let slot = match name {
                Some(n) => names
                    .iter()
                    .position(|k| k.eq_ignore_ascii_case(n))
                    .ok_or_else(|| err(format!("unknown parameter `{n}`")))?,
                None => i,
            };
            if slot >= names.len() {
                return Err(err("too many arguments".into()));
            }
            if seen[slot] {
                return Err(err(format!("`{}` given twice", names[slot])));
            }
            seen[slot] = true;
            values[slot] = Some(match arg {
                Param::Number(v) => *v,
                Param::Column(c) => lookup(c)
                    .ok_or_else(|| err(format!("no value for column `{c}`")))?,
                Param::Model(_) => return Err(err("nested model not allowed here".into())),
            });
        }
        let get = |i: usize| {
            values[i].ok_or_else(|| err(format!("missing parameter `{}`", names[i])))
        };
        match family.as_str() {
            "normal" | "norm" | "gaussian" => DistributionModel::normal(get(0)?, get(1)?),
            "t" | "student_t" | "studentt" => {
                DistributionModel::student_t(get(0)?, get(1)?, get(2)?)
            }
            "gamma" => DistributionModel::gamma(get(0)?, get(1)?),
            _ => {
                let trials = get(0)?;
                if trials < 0.0 || trials.fract() != 0.0 || !trials.is_finite() {
                    return Err(err(format!("trials must be a nonnegative integer, got {trials}")));
                }
                DistributionModel::binomial(trials as u64, get(1)?)
            }
        }
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, (name, arg)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if let Some(n) = name {
                write!(f, "{n}=")?;
            }
            match arg {
                Param::Number(v) => write!(f, "{v}")?,
                Param::Column(c) => f.write_str(c)?,
                Param::Model(m) => write!(f, "{m}")?,
            }
        }
        f.write_str(")")
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, reason: &str) -> Error {
        Error::ModelSpec {
            spec: self.src.to_string(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos || self.bytes[start].is_ascii_digit() {
            self.pos = start;
            return Err(self.err("expected a name"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && matches!(self.bytes[self.pos], b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E')
        {
            self.pos += 1;
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| {
                self.pos = start;
                self.err("expected a number")
            })
    }

    fn model(&mut self) -> Result<ModelSpec> {
        let family = self.ident()?;
        self.expect(b'(')?;
        let mut args = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(ModelSpec { family, args });
        }
        loop {
            args.push(self.arg()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
        Ok(ModelSpec { family, args })
    }

    fn arg(&mut self) -> Result<(Option<String>, Param)> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.') => {
                Ok((None, Param::Number(self.number()?)))
            }
            Some(_) => {
                let save = self.pos;
                let name = self.ident()?;
                match self.peek() {
                    Some(b'=') => {
                        self.pos += 1;
                        Ok((Some(name), self.value()?))
                    }
                    Some(b'(') => {
                        self.pos = save;
                        Ok((None, Param::Model(self.model()?)))
                    }
                    _ => Ok((None, Param::Column(name))),
                }
            }
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn value(&mut self) -> Result<Param> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.') => {
                Ok(Param::Number(self.number()?))
            }
            Some(_) => {
                let save = self.pos;
                let name = self.ident()?;
                if self.peek() == Some(b'(') {
                    self.pos = save;
                    Ok(Param::Model(self.model()?))
                } else {
                    Ok(Param::Column(name))
                }
            }
            None => Err(self.err("unexpected end of input")),
        }
    }
}
