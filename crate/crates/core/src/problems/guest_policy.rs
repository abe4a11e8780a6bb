//! Policy adapters that call an interpreted candidate function.

use super::bpp::{self, BppPolicy};
use super::kp::{self, KpPolicy};
use super::tsp::{self, TspInstance, TspPolicy};
use super::{Failure, FailureKind, Instance};
use crate::guest::{GuestProgram, Interpreter, Limits, Value};

fn index_of(v: &Value<'_>, what: &str) -> Result<usize, Failure> {
    let idx = match v {
        Value::Float(f) if f.fract() == 0.0 && f.is_finite() => Some(*f as i64),
        other => other.as_int(),
    };
    match idx {
        Some(i) if i >= 0 => Ok(i as usize),
        _ => Err(Failure::infeasible(format!("{what} must be a non-negative integer, got {v}"))),
    }
}

fn ints<'p>(xs: impl Iterator<Item = i64>) -> Value<'p> {
    Value::list(xs.map(Value::Int).collect())
}

pub struct GuestTsp<'a, 'p> {
    interp: &'a mut Interpreter<'p>,
    entry: &'a str,
    dist: Value<'p>,
}

impl<'a, 'p> GuestTsp<'a, 'p> {
    pub fn new(interp: &'a mut Interpreter<'p>, entry: &'a str, inst: &TspInstance) -> Self {
        let dist = Value::list((0..inst.n()).map(|i| Value::floats(inst.row(i))).collect());
        GuestTsp { interp, entry, dist }
    }
}

impl TspPolicy for GuestTsp<'_, '_> {
    fn select_next_node(&mut self, current: usize, destination: usize, unvisited: &[usize], _: &TspInstance) -> Result<usize, Failure> {
        let args = vec![
            Value::Int(current as i64),
            Value::Int(destination as i64),
            ints(unvisited.iter().map(|&v| v as i64)),
            self.dist.clone(),
        ];
        let out = self.interp.call_global(self.entry, args)?;
        index_of(&out, "next node")
    }
}

pub struct GuestKp<'a, 'p> {
    interp: &'a mut Interpreter<'p>,
    entry: &'a str,
}

impl<'a, 'p> GuestKp<'a, 'p> {
    pub fn new(interp: &'a mut Interpreter<'p>, entry: &'a str) -> Self {
        GuestKp { interp, entry }
    }
}

impl KpPolicy for GuestKp<'_, '_> {
    fn select_next_item(&mut self, cap: f64, values: &[f64], weights: &[f64]) -> Result<Option<usize>, Failure> {
        let args = vec![Value::Float(cap), Value::floats(values), Value::floats(weights)];
        match self.interp.call_global(self.entry, args)? {
            Value::None => Ok(None),
            out => index_of(&out, "item index").map(Some),
        }
    }
}

pub struct GuestBpp<'a, 'p> {
    interp: &'a mut Interpreter<'p>,
    entry: &'a str,
}

impl<'a, 'p> GuestBpp<'a, 'p> {
    pub fn new(interp: &'a mut Interpreter<'p>, entry: &'a str) -> Self {
        GuestBpp { interp, entry }
    }
}

impl BppPolicy for GuestBpp<'_, '_> {
    fn priority(&mut self, item: u32, caps: &[u32]) -> Result<Vec<f64>, Failure> {
        let args = vec![Value::Int(item as i64), ints(caps.iter().map(|&c| c as i64))];
        let out = self.interp.call_global(self.entry, args)?;
        let items: Vec<Value<'_>> = match &out {
            Value::List(l) => l.borrow().clone(),
            Value::Tuple(t) => t.to_vec(),
            other => return Err(Failure::infeasible(format!("priorities must be a sequence, got {}", other.type_name()))),
        };
        items
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Failure::infeasible(format!("priority {v} is not a number"))))
            .collect()
    }
}

/// Loads `program` in a fresh interpreter and runs its `entry` policy on one
/// instance, returning the native objective.
pub fn run_guest_instance(program: &GuestProgram, entry: &str, inst: &Instance, limits: Limits) -> Result<f64, Failure> {
    let mut interp = Interpreter::load(program, limits)?;
    if interp.global(entry).is_none() {
        return Err(Failure::new(FailureKind::ExecError, format!("NameError: name '{entry}' is not defined")));
    }
    match inst {
        Instance::Tsp(t) => {
            let mut p = GuestTsp::new(&mut interp, entry, t);
            tsp::evaluate(&mut p, t, 0)
        }
        Instance::Kp(k) => kp::evaluate(&mut GuestKp::new(&mut interp, entry), k),
        Instance::Bpp(b) => bpp::evaluate(&mut GuestBpp::new(&mut interp, entry), b).map(|n| n as f64),
    }
}
