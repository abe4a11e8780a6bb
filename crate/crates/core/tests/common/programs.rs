//! Random Python programs and lexical variants that keep their structure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

const NAMES: &[&str] = &["alpha", "beta", "gamma", "delta", "eps", "score", "best", "total", "k", "w"];
const BUILTINS: &[&str] = &["min", "max", "abs"];

/// A program as a token list: identifiers are `Ident(i)` so they can be
/// renamed consistently, literals are `Num` so they can be re-drawn.
#[derive(Debug, Clone)]
pub enum Piece {
    Text(String),
    Ident(usize),
    Num(f64),
}

#[derive(Debug, Clone)]
pub struct Program {
    pub pieces: Vec<Piece>,
    pub idents: usize,
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    out: Vec<Piece>,
    vars: Vec<usize>,
    next: usize,
}

impl Gen<'_> {
    fn t(&mut self, s: &str) {
        self.out.push(Piece::Text(s.into()));
    }

    fn fresh(&mut self) -> usize {
        self.next += 1;
        self.next - 1
    }

    fn expr(&mut self, depth: u32) {
        let pick = if depth == 0 { self.rng.random_range(0..2) } else { self.rng.random_range(0..5) };
        match pick {
            0 if !self.vars.is_empty() => {
                let v = self.vars[self.rng.random_range(0..self.vars.len())];
                self.out.push(Piece::Ident(v));
            }
            0 | 1 => {
                let n = if self.rng.random_bool(0.5) { self.rng.random_range(0..20) as f64 } else { self.rng.random_range(0.0..5.0) };
                self.out.push(Piece::Num(n));
            }
            2 => {
                self.t("(");
                self.expr(depth - 1);
                let op = [" + ", " - ", " * ", " / "][self.rng.random_range(0..4)];
                self.t(op);
                self.expr(depth - 1);
                self.t(")");
            }
            3 => {
                let f = BUILTINS[self.rng.random_range(0..BUILTINS.len())];
                self.t(f);
                self.t("(");
                self.expr(depth - 1);
                if f != "abs" {
                    self.t(", ");
                    self.expr(depth - 1);
                }
                self.t(")");
            }
            _ => {
                self.t("-");
                self.expr(depth - 1);
            }
        }
    }

    fn indent(&mut self, level: usize) {
        self.t(&"    ".repeat(level));
    }

    fn stmt(&mut self, level: usize, depth: u32) {
        self.indent(level);
        match self.rng.random_range(0..if depth == 0 { 1 } else { 3 }) {
            0 => {
                let v = if !self.vars.is_empty() && self.rng.random_bool(0.3) {
                    self.vars[self.rng.random_range(0..self.vars.len())]
                } else {
                    self.fresh()
                };
                self.out.push(Piece::Ident(v));
                self.t(" = ");
                self.expr(2);
                self.t("\n");
                if !self.vars.contains(&v) {
                    self.vars.push(v);
                }
            }
            1 => {
                self.t("if ");
                self.expr(1);
                let cmp = [" < ", " > ", " == "][self.rng.random_range(0..3)];
                self.t(cmp);
                self.expr(1);
                self.t(":\n");
                self.stmt(level + 1, depth - 1);
            }
            _ => {
                let v = self.fresh();
                self.t("for ");
                self.out.push(Piece::Ident(v));
                self.t(" in range(");
                let bound = self.rng.random_range(1..9) as f64;
                self.out.push(Piece::Num(bound));
                self.t("):\n");
                self.vars.push(v);
                self.stmt(level + 1, depth - 1);
            }
        }
    }
}

pub fn random_program(rng: &mut ChaCha8Rng) -> Program {
    let mut g = Gen { rng, out: Vec::new(), vars: Vec::new(), next: 0 };
    let f = g.fresh();
    g.t("def ");
    g.out.push(Piece::Ident(f));
    g.t("(");
    let params = g.rng.random_range(1..4);
    for i in 0..params {
        if i > 0 {
            g.t(", ");
        }
        let p = g.fresh();
        g.out.push(Piece::Ident(p));
        g.vars.push(p);
    }
    g.t("):\n");
    for _ in 0..g.rng.random_range(1..5) {
        g.stmt(1, 2);
    }
    g.t("    return ");
    g.expr(2);
    g.t("\n");
    Program { idents: g.next, pieces: g.out }
}

fn render_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

impl Program {
    /// Plain rendering with the base identifier pool.
    pub fn render(&self) -> String {
        self.render_with(&|i| format!("{}{}", NAMES[i % NAMES.len()], i), &|v| render_num(v), false)
    }

    fn render_with(&self, name: &dyn Fn(usize) -> String, num: &dyn Fn(f64) -> String, comments: bool) -> String {
        let mut s = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => {
                    if comments && t.ends_with(":\n") {
                        s.push_str(&t[..t.len() - 1]);
                        s.push_str("  # branch\n");
                    } else {
                        s.push_str(t);
                    }
                }
                Piece::Ident(i) => s.push_str(&name(*i)),
                Piece::Num(v) => s.push_str(&num(*v)),
            }
        }
        s
    }

    /// Same structure, different surface: renamed identifiers, re-drawn
    /// literals, comments, a module docstring and imports.
    pub fn variant(&self, rng: &mut ChaCha8Rng) -> String {
        let salt: u32 = rng.random_range(0..1000);
        let nums: Vec<f64> = self
            .pieces
            .iter()
            .filter(|p| matches!(p, Piece::Num(_)))
            .map(|_| if rng.random_bool(0.5) { rng.random_range(0..99) as f64 } else { rng.random_range(0.0..9.0) })
            .collect();
        let cursor = std::cell::Cell::new(0);
        let body = self.render_with(
            &|i| format!("v{salt}_{i}"),
            &|_| {
                let v = nums[cursor.get()];
                cursor.set(cursor.get() + 1);
                render_num(v)
            },
            true,
        );
        format!("\"\"\"Variant {salt}.\"\"\"\nimport math\nfrom random import random\n\n# rewritten\n{body}")
    }
}
