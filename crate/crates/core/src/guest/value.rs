use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::rc::Rc;

use indexmap::IndexMap;
use rustpython_parser::ast;

use super::interp::Scope;
use super::GuestError;

/// Runtime value of the embedded interpreter. `'p` is the lifetime of the
/// parsed program that function bodies point into.
#[derive(Clone)]
pub enum Value<'p> {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    List(Rc<RefCell<Vec<Value<'p>>>>),
    Tuple(Rc<[Value<'p>]>),
    Dict(Rc<RefCell<IndexMap<Key, (Value<'p>, Value<'p>)>>>),
    Set(Rc<RefCell<IndexMap<Key, Value<'p>>>>),
    Range(i64, i64, i64),
    Iter(Rc<RefCell<VecDeque<Value<'p>>>>),
    Function(Rc<Function<'p>>),
    Builtin(Builtin),
    Module(ModuleKind),
    Method(Rc<(Value<'p>, String)>),
}

/// Hashable projection used for dict and set membership.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Key {
    None,
    Int(i64),
    Float(u64),
    Str(Rc<str>),
    Tuple(Vec<Key>),
}

pub enum FunctionBody<'p> {
    Block(&'p [ast::Stmt]),
    Expr(&'p ast::Expr),
}

pub struct Param<'p> {
    pub name: String,
    pub default: Option<Value<'p>>,
}

pub struct Function<'p> {
    pub name: String,
    pub params: Vec<Param<'p>>,
    pub vararg: Option<String>,
    pub body: FunctionBody<'p>,
    pub closure: Rc<Scope<'p>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModuleKind {
    Math,
    Heapq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Abs,
    All,
    Any,
    Bool,
    Dict,
    Divmod,
    Enumerate,
    Filter,
    Float,
    Int,
    Isinstance,
    Iter,
    Len,
    List,
    Map,
    Max,
    Min,
    Next,
    Pow,
    Print,
    Range,
    Reversed,
    Round,
    Set,
    Sorted,
    Str,
    Sum,
    Tuple,
    Zip,
    Math(&'static str),
    Heapq(&'static str),
}

impl Builtin {
    pub fn lookup(name: &str) -> Option<Builtin> {
        use Builtin::*;
        Some(match name {
            "abs" => Abs,
            "all" => All,
            "any" => Any,
            "bool" => Bool,
            "dict" => Dict,
            "divmod" => Divmod,
            "enumerate" => Enumerate,
            "filter" => Filter,
            "float" => Float,
            "int" => Int,
            "isinstance" => Isinstance,
            "iter" => Iter,
            "len" => Len,
            "list" => List,
            "map" => Map,
            "max" => Max,
            "min" => Min,
            "next" => Next,
            "pow" => Pow,
            "print" => Print,
            "range" => Range,
            "reversed" => Reversed,
            "round" => Round,
            "set" => Set,
            "sorted" => Sorted,
            "str" => Str,
            "sum" => Sum,
            "tuple" => Tuple,
            "zip" => Zip,
            _ => return None,
        })
    }
}

pub const MATH_FUNCTIONS: &[&str] = &[
    "sqrt", "exp", "log", "log2", "log10", "log1p", "pow", "fabs", "floor", "ceil", "isinf",
    "isnan", "isfinite", "tanh", "sin", "cos", "tan", "atan", "atan2", "hypot", "expm1",
];

pub const HEAPQ_FUNCTIONS: &[&str] =
    &["nsmallest", "nlargest", "heappush", "heappop", "heapify"];

impl<'p> Value<'p> {
    pub fn str(s: &str) -> Self {
        Value::Str(Rc::from(s))
    }

    pub fn list(items: Vec<Value<'p>>) -> Self {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn tuple(items: Vec<Value<'p>>) -> Self {
        Value::Tuple(Rc::from(items))
    }

    pub fn set_of(items: Vec<Value<'p>>) -> Result<Self, GuestError> {
        let mut map = IndexMap::new();
        for v in items {
            map.insert(v.key()?, v);
        }
        Ok(Value::Set(Rc::new(RefCell::new(map))))
    }

    pub fn floats(xs: &[f64]) -> Self {
        Value::list(xs.iter().map(|&x| Value::Float(x)).collect())
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Dict(_) => "dict",
            Value::Set(_) => "set",
            Value::Range(..) => "range",
            Value::Iter(_) => "iterator",
            Value::Function(_) => "function",
            Value::Builtin(_) => "builtin_function",
            Value::Module(_) => "module",
            Value::Method(_) => "method",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.borrow().is_empty(),
            Value::Tuple(t) => !t.is_empty(),
            Value::Dict(d) => !d.borrow().is_empty(),
            Value::Set(s) => !s.borrow().is_empty(),
            Value::Range(a, b, s) => range_len(*a, *b, *s) > 0,
            Value::Iter(it) => !it.borrow().is_empty(),
            _ => true,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Bool(b) => Some(*b as i64 as f64),
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Bool(b) => Some(*b as i64),
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn key(&self) -> Result<Key, GuestError> {
        Ok(match self {
            Value::None => Key::None,
            Value::Bool(b) => Key::Int(*b as i64),
            Value::Int(i) => Key::Int(*i),
            Value::Float(f) => {
                if f.fract() == 0.0 && f.abs() < 9.0e15 {
                    Key::Int(*f as i64)
                } else {
                    Key::Float(f.to_bits())
                }
            }
            Value::Str(s) => Key::Str(s.clone()),
            Value::Tuple(t) => Key::Tuple(t.iter().map(|v| v.key()).collect::<Result<_, _>>()?),
            other => {
                return Err(GuestError::exec(format!("unhashable type: '{}'", other.type_name())))
            }
        })
    }

    /// Python `==`.
    pub fn py_eq(&self, other: &Value<'p>) -> bool {
        if let (Some(a), Some(b)) = (self.as_f64(), other.as_f64()) {
            if let (Some(x), Some(y)) = (self.as_int(), other.as_int()) {
                return x == y;
            }
            return a == b;
        }
        match (self, other) {
            (Value::None, Value::None) => true,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => {
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.py_eq(y))
            }
            (Value::Tuple(a), Value::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.py_eq(y))
            }
            (Value::Set(a), Value::Set(b)) => {
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len() && a.keys().all(|k| b.contains_key(k))
            }
            (Value::Dict(a), Value::Dict(b)) => {
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len()
                    && a.iter().all(|(k, (_, v))| b.get(k).is_some_and(|(_, w)| v.py_eq(w)))
            }
            (Value::Range(a, b, c), Value::Range(x, y, z)) => (a, b, c) == (x, y, z),
            (Value::Builtin(a), Value::Builtin(b)) => a == b,
            (Value::Module(a), Value::Module(b)) => a == b,
            (Value::Function(a), Value::Function(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }

    /// Python `is`, approximated: identity for containers, equality for scalars.
    pub fn py_is(&self, other: &Value<'p>) -> bool {
        match (self, other) {
            (Value::List(a), Value::List(b)) => Rc::ptr_eq(a, b),
            (Value::Dict(a), Value::Dict(b)) => Rc::ptr_eq(a, b),
            (Value::Set(a), Value::Set(b)) => Rc::ptr_eq(a, b),
            (Value::None, Value::None) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::None, _) | (_, Value::None) => false,
            (Value::Bool(_), _) | (_, Value::Bool(_)) => false,
            _ => self.py_eq(other),
        }
    }

    /// Python ordering for `<`, `sorted`, `min` and friends.
    pub fn py_cmp(&self, other: &Value<'p>) -> Result<Ordering, GuestError> {
        if let (Some(x), Some(y)) = (self.as_int(), other.as_int()) {
            return Ok(x.cmp(&y));
        }
        if let (Some(a), Some(b)) = (self.as_f64(), other.as_f64()) {
            // NaN compares false both ways in Python; treat as equal here.
            return Ok(a.partial_cmp(&b).unwrap_or(Ordering::Equal));
        }
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => Ok(a.cmp(b)),
            (Value::Tuple(a), Value::Tuple(b)) => seq_cmp(a, b),
            (Value::List(a), Value::List(b)) => seq_cmp(&a.borrow(), &b.borrow()),
            _ => Err(GuestError::exec(format!(
                "'<' not supported between instances of '{}' and '{}'",
                self.type_name(),
                other.type_name()
            ))),
        }
    }
}

fn seq_cmp<'p>(a: &[Value<'p>], b: &[Value<'p>]) -> Result<Ordering, GuestError> {
    for (x, y) in a.iter().zip(b) {
        if !x.py_eq(y) {
            return x.py_cmp(y);
        }
    }
    Ok(a.len().cmp(&b.len()))
}

pub fn range_len(start: i64, stop: i64, step: i64) -> i64 {
    if step > 0 && start < stop {
        (stop - start + step - 1) / step
    } else if step < 0 && start > stop {
        (start - stop - step - 1) / (-step)
    } else {
        0
    }
}

pub fn format_float(f: f64) -> String {
    if f.is_infinite() {
        if f > 0.0 { "inf".into() } else { "-inf".into() }
    } else if f.is_nan() {
        "nan".into()
    } else {
        format!("{f:?}")
    }
}

impl fmt::Display for Value<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn seq(f: &mut fmt::Formatter<'_>, items: &[Value<'_>], open: &str, close: &str) -> fmt::Result {
            f.write_str(open)?;
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                match v {
                    Value::Str(s) => write!(f, "'{s}'")?,
                    other => write!(f, "{other}")?,
                }
            }
            if items.len() == 1 && open == "(" {
                f.write_str(",")?;
            }
            f.write_str(close)
        }
        match self {
            Value::None => f.write_str("None"),
            Value::Bool(true) => f.write_str("True"),
            Value::Bool(false) => f.write_str("False"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&format_float(*x)),
            Value::Str(s) => f.write_str(s),
            Value::List(l) => seq(f, &l.borrow(), "[", "]"),
            Value::Tuple(t) => seq(f, t, "(", ")"),
            Value::Set(s) => {
                let items: Vec<Value<'_>> = s.borrow().values().cloned().collect();
                seq(f, &items, "{", "}")
            }
            Value::Dict(d) => {
                f.write_str("{")?;
                for (i, (k, v)) in d.borrow().values().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
            Value::Range(a, b, s) => write!(f, "range({a}, {b}, {s})"),
            other => write!(f, "<{}>", other.type_name()),
        }
    }
}

impl fmt::Debug for Value<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
