use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::rc::Rc;

use indexmap::IndexMap;

use super::interp::{float_divmod, int_floor_div, int_mod, normalize_index, Interpreter, Kwargs};
use super::value::{range_len, Builtin, Value};
use super::GuestError;

fn err<T>(msg: impl Into<String>) -> Result<T, GuestError> {
    Err(GuestError::exec(msg))
}

fn take_kw<'p>(kwargs: &mut Kwargs<'p>, name: &str) -> Option<Value<'p>> {
    let i = kwargs.iter().position(|(k, _)| k == name)?;
    Some(kwargs.remove(i).1)
}

fn no_kwargs(kwargs: &Kwargs<'_>, func: &str) -> Result<(), GuestError> {
    match kwargs.first() {
        Some((k, _)) => err(format!("TypeError: {func}() got an unexpected keyword argument '{k}'")),
        None => Ok(()),
    }
}

fn arity(args: &[Value<'_>], min: usize, max: usize, func: &str) -> Result<(), GuestError> {
    if args.len() < min || args.len() > max {
        return err(format!("TypeError: {func}() takes {min} to {max} arguments ({} given)", args.len()));
    }
    Ok(())
}

fn num(v: &Value<'_>, func: &str) -> Result<f64, GuestError> {
    v.as_f64()
        .ok_or_else(|| GuestError::exec(format!("TypeError: {func}() requires a number, not '{}'", v.type_name())))
}

fn iter_value<'p>(items: Vec<Value<'p>>) -> Value<'p> {
    Value::Iter(Rc::new(RefCell::new(items.into())))
}

/// Stable sort honouring Python comparison, an optional key function and
/// `reverse` (which keeps equal elements in original order).
pub(super) fn sort_values<'p>(
    it: &mut Interpreter<'p>,
    items: Vec<Value<'p>>,
    key: Option<&Value<'p>>,
    reverse: bool,
) -> Result<Vec<Value<'p>>, GuestError> {
    let keys = match key {
        Some(Value::None) | None => items.clone(),
        Some(f) => {
            let mut keys = Vec::with_capacity(items.len());
            for v in &items {
                keys.push(it.call1(f, v.clone())?);
            }
            keys
        }
    };
    let n = items.len() as u64;
    it.charge(n * (64 - n.leading_zeros() as u64) / 4)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let failure: Cell<Option<GuestError>> = Cell::new(None);
    order.sort_by(|&a, &b| {
        let ord = keys[a].py_cmp(&keys[b]).unwrap_or_else(|e| {
            failure.set(Some(e));
            Ordering::Equal
        });
        if reverse {
            ord.reverse()
        } else {
            ord
        }
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(order.into_iter().map(|i| items[i].clone()).collect())
}

fn extremum<'p>(
    it: &mut Interpreter<'p>,
    args: Vec<Value<'p>>,
    mut kwargs: Kwargs<'p>,
    want: Ordering,
    name: &str,
) -> Result<Value<'p>, GuestError> {
    let key = take_kw(&mut kwargs, "key").filter(|k| !matches!(k, Value::None));
    let default = take_kw(&mut kwargs, "default");
    no_kwargs(&kwargs, name)?;
    let items = match args.len() {
        0 => return err(format!("TypeError: {name} expected at least 1 argument, got 0")),
        1 => it.iterate(&args[0])?,
        _ => args,
    };
    let mut best: Option<(Value<'p>, Value<'p>)> = None;
    for v in items {
        let k = match &key {
            Some(f) => it.call1(f, v.clone())?,
            None => v.clone(),
        };
        let replace = match &best {
            None => true,
            Some((bk, _)) => k.py_cmp(bk)? == want,
        };
        if replace {
            best = Some((k, v));
        }
    }
    match (best, default) {
        (Some((_, v)), _) => Ok(v),
        (None, Some(d)) => Ok(d),
        (None, None) => err(format!("ValueError: {name}() arg is an empty sequence")),
    }
}

fn to_float(v: &Value<'_>) -> Result<f64, GuestError> {
    match v {
        Value::Str(s) => {
            let t = s.trim().to_ascii_lowercase();
            match t.as_str() {
                "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "nan" | "+nan" | "-nan" => Ok(f64::NAN),
                _ => t
                    .parse::<f64>()
                    .or_else(|_| err(format!("ValueError: could not convert string to float: '{s}'"))),
            }
        }
        other => num(other, "float"),
    }
}

fn float_to_int(f: f64) -> Result<i64, GuestError> {
    if f.is_nan() {
        return err("ValueError: cannot convert float NaN to integer");
    }
    if f.is_infinite() || f.abs() >= 9.2e18 {
        return err("OverflowError: cannot convert float infinity to integer");
    }
    Ok(f as i64)
}

fn is_instance(v: &Value<'_>, ty: &Value<'_>) -> Result<bool, GuestError> {
    Ok(match ty {
        Value::Tuple(ts) => {
            for t in ts.iter() {
                if is_instance(v, t)? {
                    return Ok(true);
                }
            }
            false
        }
        Value::Builtin(b) => matches!(
            (b, v),
            (Builtin::Int, Value::Int(_) | Value::Bool(_))
                | (Builtin::Float, Value::Float(_))
                | (Builtin::Bool, Value::Bool(_))
                | (Builtin::Str, Value::Str(_))
                | (Builtin::List, Value::List(_))
                | (Builtin::Tuple, Value::Tuple(_))
                | (Builtin::Dict, Value::Dict(_))
                | (Builtin::Set, Value::Set(_))
        ),
        _ => return err("TypeError: isinstance() arg 2 must be a type or tuple of types"),
    })
}

pub(super) fn call_builtin<'p>(
    it: &mut Interpreter<'p>,
    b: Builtin,
    args: Vec<Value<'p>>,
    mut kwargs: Kwargs<'p>,
) -> Result<Value<'p>, GuestError> {
    it.charge(1)?;
    use Builtin as B;
    match b {
        B::Math(name) => {
            no_kwargs(&kwargs, name)?;
            math(name, &args)
        }
        B::Heapq(name) => heapq(it, name, args, kwargs),
        B::Print => Ok(Value::None),
        B::Len => {
            arity(&args, 1, 1, "len")?;
            let n = match &args[0] {
                Value::List(l) => l.borrow().len(),
                Value::Tuple(t) => t.len(),
                Value::Str(s) => s.chars().count(),
                Value::Dict(d) => d.borrow().len(),
                Value::Set(s) => s.borrow().len(),
                Value::Range(a, b, s) => range_len(*a, *b, *s) as usize,
                other => return err(format!("TypeError: object of type '{}' has no len()", other.type_name())),
            };
            Ok(Value::Int(n as i64))
        }
        B::Range => {
            no_kwargs(&kwargs, "range")?;
            arity(&args, 1, 3, "range")?;
            let ints: Vec<i64> = args
                .iter()
                .map(|a| {
                    a.as_int().ok_or_else(|| {
                        GuestError::exec(format!("TypeError: '{}' object cannot be interpreted as an integer", a.type_name()))
                    })
                })
                .collect::<Result<_, _>>()?;
            let (start, stop, step) = match ints.as_slice() {
                [stop] => (0, *stop, 1),
                [start, stop] => (*start, *stop, 1),
                [start, stop, step] => (*start, *stop, *step),
                _ => unreachable!(),
            };
            if step == 0 {
                return err("ValueError: range() arg 3 must not be zero");
            }
            Ok(Value::Range(start, stop, step))
        }
        B::Min => extremum(it, args, kwargs, Ordering::Less, "min"),
        B::Max => extremum(it, args, kwargs, Ordering::Greater, "max"),
        B::Abs => {
            arity(&args, 1, 1, "abs")?;
            match &args[0] {
                Value::Float(f) => Ok(Value::Float(f.abs())),
                v => match v.as_int() {
                    Some(i) => i.checked_abs().map(Value::Int).ok_or_else(|| GuestError::exec("OverflowError")),
                    None => err(format!("TypeError: bad operand type for abs(): '{}'", v.type_name())),
                },
            }
        }
        B::Sum => {
            let start = take_kw(&mut kwargs, "start");
            no_kwargs(&kwargs, "sum")?;
            arity(&args, 1, 2, "sum")?;
            let mut acc = args.get(1).cloned().or(start).unwrap_or(Value::Int(0));
            for v in it.iterate(&args[0])? {
                acc = it.binop(rustpython_parser::ast::Operator::Add, &acc, &v)?;
            }
            Ok(acc)
        }
        B::Sorted => {
            let key = take_kw(&mut kwargs, "key");
            let reverse = take_kw(&mut kwargs, "reverse").is_some_and(|r| r.truthy());
            no_kwargs(&kwargs, "sorted")?;
            arity(&args, 1, 1, "sorted")?;
            let items = it.iterate(&args[0])?;
            Ok(Value::list(sort_values(it, items, key.as_ref(), reverse)?))
        }
        B::Reversed => {
            arity(&args, 1, 1, "reversed")?;
            let mut items = it.iterate(&args[0])?;
            items.reverse();
            Ok(iter_value(items))
        }
        B::List => {
            arity(&args, 0, 1, "list")?;
            Ok(Value::list(match args.first() {
                Some(v) => it.iterate(v)?,
                None => Vec::new(),
            }))
        }
        B::Tuple => {
            arity(&args, 0, 1, "tuple")?;
            Ok(Value::tuple(match args.first() {
                Some(v) => it.iterate(v)?,
                None => Vec::new(),
            }))
        }
        B::Set => {
            arity(&args, 0, 1, "set")?;
            Value::set_of(match args.first() {
                Some(v) => it.iterate(v)?,
                None => Vec::new(),
            })
        }
        B::Dict => {
            arity(&args, 0, 1, "dict")?;
            let mut map = IndexMap::new();
            if let Some(src) = args.first() {
                if let Value::Dict(d) = src {
                    map = d.borrow().clone();
                } else {
                    for pair in it.iterate(src)? {
                        let kv = it.iterate(&pair)?;
                        if kv.len() != 2 {
                            return err("ValueError: dictionary update sequence element has wrong length");
                        }
                        map.insert(kv[0].key()?, (kv[0].clone(), kv[1].clone()));
                    }
                }
            }
            for (k, v) in kwargs {
                let key = Value::str(&k);
                map.insert(key.key()?, (key, v));
            }
            Ok(Value::Dict(Rc::new(RefCell::new(map))))
        }
        B::Enumerate => {
            let start = take_kw(&mut kwargs, "start");
            no_kwargs(&kwargs, "enumerate")?;
            arity(&args, 1, 2, "enumerate")?;
            let start = args.get(1).cloned().or(start).and_then(|v| v.as_int()).unwrap_or(0);
            let items = it.iterate(&args[0])?;
            Ok(iter_value(
                items
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| Value::tuple(vec![Value::Int(start + i as i64), v]))
                    .collect(),
            ))
        }
        B::Zip => {
            no_kwargs(&kwargs, "zip")?;
            let mut cols = Vec::new();
            for a in &args {
                cols.push(it.iterate(a)?);
            }
            let n = cols.iter().map(|c| c.len()).min().unwrap_or(0);
            Ok(iter_value(
                (0..n).map(|i| Value::tuple(cols.iter().map(|c| c[i].clone()).collect())).collect(),
            ))
        }
        B::Map => {
            if args.len() < 2 {
                return err("TypeError: map() must have at least two arguments.");
            }
            let f = args[0].clone();
            let mut cols = Vec::new();
            for a in &args[1..] {
                cols.push(it.iterate(a)?);
            }
            let n = cols.iter().map(|c| c.len()).min().unwrap_or(0);
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let call_args = cols.iter().map(|c| c[i].clone()).collect();
                out.push(it.call(&f, call_args, Vec::new())?);
            }
            Ok(iter_value(out))
        }
        B::Filter => {
            arity(&args, 2, 2, "filter")?;
            let mut out = Vec::new();
            for v in it.iterate(&args[1])? {
                let keep = match &args[0] {
                    Value::None => v.truthy(),
                    f => it.call1(f, v.clone())?.truthy(),
                };
                if keep {
                    out.push(v);
                }
            }
            Ok(iter_value(out))
        }
        B::Any | B::All => {
            arity(&args, 1, 1, "any")?;
            let items = it.iterate(&args[0])?;
            Ok(Value::Bool(if b == B::Any {
                items.iter().any(|v| v.truthy())
            } else {
                items.iter().all(|v| v.truthy())
            }))
        }
        B::Iter => {
            arity(&args, 1, 1, "iter")?;
            if let Value::Iter(_) = &args[0] {
                return Ok(args[0].clone());
            }
            Ok(iter_value(it.iterate(&args[0])?))
        }
        B::Next => {
            arity(&args, 1, 2, "next")?;
            match &args[0] {
                Value::Iter(q) => match q.borrow_mut().pop_front() {
                    Some(v) => Ok(v),
                    None => args.get(1).cloned().ok_or_else(|| GuestError::exec("StopIteration")),
                },
                other => err(format!("TypeError: '{}' object is not an iterator", other.type_name())),
            }
        }
        B::Float => {
            arity(&args, 0, 1, "float")?;
            Ok(Value::Float(match args.first() {
                Some(v) => to_float(v)?,
                None => 0.0,
            }))
        }
        B::Int => {
            arity(&args, 0, 1, "int")?;
            Ok(Value::Int(match args.first() {
                None => 0,
                Some(Value::Float(f)) => float_to_int(*f)?,
                Some(Value::Str(s)) => s
                    .trim()
                    .parse::<i64>()
                    .or_else(|_| err(format!("ValueError: invalid literal for int(): '{s}'")))?,
                Some(v) => v
                    .as_int()
                    .ok_or_else(|| GuestError::exec(format!("TypeError: int() argument must be a number, not '{}'", v.type_name())))?,
            }))
        }
        B::Bool => Ok(Value::Bool(args.first().is_some_and(|v| v.truthy()))),
        B::Str => Ok(Value::str(&args.first().map(|v| v.to_string()).unwrap_or_default())),
        B::Round => {
            let nd = take_kw(&mut kwargs, "ndigits");
            arity(&args, 1, 2, "round")?;
            let nd = args.get(1).cloned().or(nd).filter(|v| !matches!(v, Value::None));
            match (&args[0], nd) {
                (Value::Float(f), None) => Ok(Value::Int(float_to_int(f.round_ties_even())?)),
                (Value::Float(f), Some(n)) => {
                    let n = n.as_int().ok_or_else(|| GuestError::exec("TypeError: ndigits must be an integer"))?;
                    let scale = 10f64.powi(n.clamp(-300, 300) as i32);
                    let r = (f * scale).round_ties_even() / scale;
                    Ok(Value::Float(if r.is_finite() { r } else { *f }))
                }
                (v, _) => v
                    .as_int()
                    .map(Value::Int)
                    .ok_or_else(|| GuestError::exec(format!("TypeError: type {} doesn't define __round__", v.type_name()))),
            }
        }
        B::Pow => {
            arity(&args, 2, 3, "pow")?;
            if let Some(m) = args.get(2) {
                let (Some(mut base), Some(mut exp), Some(m)) = (args[0].as_int(), args[1].as_int(), m.as_int()) else {
                    return err("TypeError: pow() 3rd argument requires integers");
                };
                if m == 0 {
                    return err("ValueError: pow() 3rd argument cannot be 0");
                }
                if exp < 0 {
                    return err("ValueError: negative exponent with modulus");
                }
                let mut acc: i128 = 1;
                base = int_mod(base, m)?;
                while exp > 0 {
                    if exp & 1 == 1 {
                        acc = acc * base as i128 % m as i128;
                    }
                    base = (base as i128 * base as i128 % m as i128) as i64;
                    exp >>= 1;
                }
                return Ok(Value::Int(int_mod(acc as i64, m)?));
            }
            it.binop(rustpython_parser::ast::Operator::Pow, &args[0], &args[1])
        }
        B::Divmod => {
            arity(&args, 2, 2, "divmod")?;
            if let (Some(a), Some(b)) = (args[0].as_int(), args[1].as_int()) {
                return Ok(Value::tuple(vec![Value::Int(int_floor_div(a, b)?), Value::Int(int_mod(a, b)?)]));
            }
            let (q, r) = float_divmod(num(&args[0], "divmod")?, num(&args[1], "divmod")?)?;
            Ok(Value::tuple(vec![Value::Float(q), Value::Float(r)]))
        }
        B::Isinstance => {
            arity(&args, 2, 2, "isinstance")?;
            Ok(Value::Bool(is_instance(&args[0], &args[1])?))
        }
    }
}

fn math<'p>(name: &str, args: &[Value<'p>]) -> Result<Value<'p>, GuestError> {
    let domain = || err::<Value<'p>>("ValueError: math domain error");
    let range = || err::<Value<'p>>("OverflowError: math range error");
    let x = match args.first() {
        Some(v) => num(v, name)?,
        None => return err(format!("TypeError: {name}() missing required argument")),
    };
    let y = match args.get(1) {
        Some(v) => Some(num(v, name)?),
        None => None,
    };
    let two = |y: Option<f64>| y.ok_or_else(|| GuestError::exec(format!("TypeError: {name}() takes 2 arguments")));
    let r = match name {
        "sqrt" => {
            if x < 0.0 {
                return domain();
            }
            x.sqrt()
        }
        "exp" => {
            let r = x.exp();
            if r.is_infinite() && x.is_finite() {
                return range();
            }
            r
        }
        "expm1" => {
            let r = x.exp_m1();
            if r.is_infinite() && x.is_finite() {
                return range();
            }
            r
        }
        "log" => {
            if x <= 0.0 {
                return domain();
            }
            match y {
                Some(b) => {
                    if b <= 0.0 || b == 1.0 {
                        return if b == 1.0 { err("ZeroDivisionError: float division by zero") } else { domain() };
                    }
                    x.ln() / b.ln()
                }
                None => x.ln(),
            }
        }
        "log2" | "log10" => {
            if x <= 0.0 {
                return domain();
            }
            if name == "log2" { x.log2() } else { x.log10() }
        }
        "log1p" => {
            if x <= -1.0 {
                return domain();
            }
            x.ln_1p()
        }
        "pow" => {
            let y = two(y)?;
            if x == 0.0 && y < 0.0 {
                return domain();
            }
            if x < 0.0 && y.fract() != 0.0 && y.is_finite() {
                return domain();
            }
            let r = x.powf(y);
            if r.is_infinite() && x.is_finite() && y.is_finite() {
                return range();
            }
            r
        }
        "fabs" => x.abs(),
        "floor" | "ceil" => {
            if let Some(i) = args[0].as_int() {
                return Ok(Value::Int(i));
            }
            let r = if name == "floor" { x.floor() } else { x.ceil() };
            return Ok(Value::Int(float_to_int(r)?));
        }
        "isinf" => return Ok(Value::Bool(x.is_infinite())),
        "isnan" => return Ok(Value::Bool(x.is_nan())),
        "isfinite" => return Ok(Value::Bool(x.is_finite())),
        "tanh" => x.tanh(),
        "sin" => x.sin(),
        "cos" => x.cos(),
        "tan" => x.tan(),
        "atan" => x.atan(),
        "atan2" => x.atan2(two(y)?),
        "hypot" => {
            let mut acc = 0.0f64;
            for v in args {
                acc = acc.hypot(num(v, name)?);
            }
            acc
        }
        other => return err(format!("AttributeError: module 'math' has no attribute '{other}'")),
    };
    Ok(Value::Float(r))
}

fn lt<'p>(a: &Value<'p>, b: &Value<'p>) -> Result<bool, GuestError> {
    Ok(a.py_cmp(b)? == Ordering::Less)
}

fn sift_down<'p>(heap: &mut [Value<'p>], start: usize, mut pos: usize) -> Result<(), GuestError> {
    let item = heap[pos].clone();
    while pos > start {
        let parent = (pos - 1) >> 1;
        if lt(&item, &heap[parent])? {
            heap[pos] = heap[parent].clone();
            pos = parent;
            continue;
        }
        break;
    }
    heap[pos] = item;
    Ok(())
}

fn sift_up<'p>(heap: &mut [Value<'p>], mut pos: usize) -> Result<(), GuestError> {
    let end = heap.len();
    let start = pos;
    let item = heap[pos].clone();
    let mut child = 2 * pos + 1;
    while child < end {
        let right = child + 1;
        if right < end && !lt(&heap[child], &heap[right])? {
            child = right;
        }
        heap[pos] = heap[child].clone();
        pos = child;
        child = 2 * pos + 1;
    }
    heap[pos] = item;
    sift_down(heap, start, pos)
}

fn heapq<'p>(
    it: &mut Interpreter<'p>,
    name: &str,
    args: Vec<Value<'p>>,
    mut kwargs: Kwargs<'p>,
) -> Result<Value<'p>, GuestError> {
    let list = |v: &Value<'p>| match v {
        Value::List(l) => Ok(l.clone()),
        other => err(format!("TypeError: heap argument must be a list, not {}", other.type_name())),
    };
    match name {
        "heappush" => {
            arity(&args, 2, 2, name)?;
            let l = list(&args[0])?;
            let mut h = l.borrow_mut();
            h.push(args[1].clone());
            let last = h.len() - 1;
            it.charge(64 - (h.len() as u64).leading_zeros() as u64)?;
            sift_down(&mut h, 0, last)?;
            Ok(Value::None)
        }
        "heappop" => {
            arity(&args, 1, 1, name)?;
            let l = list(&args[0])?;
            let mut h = l.borrow_mut();
            let Some(last) = h.pop() else {
                return err("IndexError: index out of range");
            };
            if h.is_empty() {
                return Ok(last);
            }
            it.charge(64 - (h.len() as u64).leading_zeros() as u64)?;
            let top = std::mem::replace(&mut h[0], last);
            sift_up(&mut h, 0)?;
            Ok(top)
        }
        "heapify" => {
            arity(&args, 1, 1, name)?;
            let l = list(&args[0])?;
            let mut h = l.borrow_mut();
            it.charge(h.len() as u64)?;
            for i in (0..h.len() / 2).rev() {
                sift_up(&mut h, i)?;
            }
            Ok(Value::None)
        }
        "nsmallest" | "nlargest" => {
            let key = take_kw(&mut kwargs, "key");
            no_kwargs(&kwargs, name)?;
            arity(&args, 2, 2, name)?;
            let n = args[0].as_int().ok_or_else(|| GuestError::exec("TypeError: n must be an integer"))?;
            let items = it.iterate(&args[1])?;
            let mut sorted = sort_values(it, items, key.as_ref(), name == "nlargest")?;
            sorted.truncate(n.max(0) as usize);
            Ok(Value::list(sorted))
        }
        other => err(format!("AttributeError: module 'heapq' has no attribute '{other}'")),
    }
}

pub(super) fn call_method<'p>(
    it: &mut Interpreter<'p>,
    recv: &Value<'p>,
    name: &str,
    args: Vec<Value<'p>>,
    mut kwargs: Kwargs<'p>,
) -> Result<Value<'p>, GuestError> {
    it.charge(1)?;
    let missing = || err(format!("AttributeError: '{}' object has no attribute '{name}'", recv.type_name()));
    match recv {
        Value::List(l) => match name {
            "append" => {
                arity(&args, 1, 1, name)?;
                l.borrow_mut().push(args[0].clone());
                Ok(Value::None)
            }
            "extend" => {
                arity(&args, 1, 1, name)?;
                let items = it.iterate(&args[0])?;
                l.borrow_mut().extend(items);
                Ok(Value::None)
            }
            "insert" => {
                arity(&args, 2, 2, name)?;
                let len = l.borrow().len() as i64;
                let i = args[0].as_int().ok_or_else(|| GuestError::exec("TypeError: index must be an integer"))?;
                let i = if i < 0 { (i + len).max(0) } else { i.min(len) } as usize;
                l.borrow_mut().insert(i, args[1].clone());
                Ok(Value::None)
            }
            "pop" => {
                arity(&args, 0, 1, name)?;
                let len = l.borrow().len();
                if len == 0 {
                    return err("IndexError: pop from empty list");
                }
                let i = match args.first() {
                    Some(v) => normalize_index(v, len)?,
                    None => len - 1,
                };
                it.charge((len - i) as u64 / 8)?;
                Ok(l.borrow_mut().remove(i))
            }
            "remove" | "index" | "count" => {
                arity(&args, 1, 1, name)?;
                let pos: Vec<usize> = {
                    let list = l.borrow();
                    it.charge(list.len() as u64)?;
                    list.iter().enumerate().filter(|(_, v)| v.py_eq(&args[0])).map(|(i, _)| i).collect()
                };
                match name {
                    "count" => Ok(Value::Int(pos.len() as i64)),
                    _ => match pos.first() {
                        None => err("ValueError: list.index(x): x not in list"),
                        Some(&i) if name == "index" => Ok(Value::Int(i as i64)),
                        Some(&i) => {
                            l.borrow_mut().remove(i);
                            Ok(Value::None)
                        }
                    },
                }
            }
            "sort" => {
                let key = take_kw(&mut kwargs, "key");
                let reverse = take_kw(&mut kwargs, "reverse").is_some_and(|r| r.truthy());
                no_kwargs(&kwargs, name)?;
                let items = l.borrow().clone();
                let sorted = sort_values(it, items, key.as_ref(), reverse)?;
                *l.borrow_mut() = sorted;
                Ok(Value::None)
            }
            "reverse" => {
                l.borrow_mut().reverse();
                Ok(Value::None)
            }
            "copy" => Ok(Value::list(l.borrow().clone())),
            "clear" => {
                l.borrow_mut().clear();
                Ok(Value::None)
            }
            _ => missing(),
        },
        Value::Dict(d) => match name {
            "get" => {
                arity(&args, 1, 2, name)?;
                Ok(match d.borrow().get(&args[0].key()?) {
                    Some((_, v)) => v.clone(),
                    None => args.get(1).cloned().unwrap_or(Value::None),
                })
            }
            "keys" => Ok(Value::list(d.borrow().values().map(|(k, _)| k.clone()).collect())),
            "values" => Ok(Value::list(d.borrow().values().map(|(_, v)| v.clone()).collect())),
            "items" => Ok(Value::list(
                d.borrow().values().map(|(k, v)| Value::tuple(vec![k.clone(), v.clone()])).collect(),
            )),
            "pop" => {
                arity(&args, 1, 2, name)?;
                match d.borrow_mut().shift_remove(&args[0].key()?) {
                    Some((_, v)) => Ok(v),
                    None => args.get(1).cloned().ok_or_else(|| GuestError::exec(format!("KeyError: {}", args[0]))),
                }
            }
            "setdefault" => {
                arity(&args, 1, 2, name)?;
                let k = args[0].key()?;
                let default = args.get(1).cloned().unwrap_or(Value::None);
                let mut map = d.borrow_mut();
                Ok(map.entry(k).or_insert((args[0].clone(), default)).1.clone())
            }
            "update" => {
                let other = call_builtin(it, Builtin::Dict, args, kwargs)?;
                if let Value::Dict(o) = other {
                    let o = o.borrow().clone();
                    d.borrow_mut().extend(o);
                }
                Ok(Value::None)
            }
            "copy" => Ok(Value::Dict(Rc::new(RefCell::new(d.borrow().clone())))),
            "clear" => {
                d.borrow_mut().clear();
                Ok(Value::None)
            }
            _ => missing(),
        },
        Value::Set(s) => match name {
            "add" => {
                arity(&args, 1, 1, name)?;
                s.borrow_mut().insert(args[0].key()?, args[0].clone());
                Ok(Value::None)
            }
            "remove" => {
                arity(&args, 1, 1, name)?;
                match s.borrow_mut().shift_remove(&args[0].key()?) {
                    Some(_) => Ok(Value::None),
                    None => err(format!("KeyError: {}", args[0])),
                }
            }
            "discard" => {
                arity(&args, 1, 1, name)?;
                s.borrow_mut().shift_remove(&args[0].key()?);
                Ok(Value::None)
            }
            "pop" => match s.borrow_mut().shift_remove_index(0) {
                Some((_, v)) => Ok(v),
                None => err("KeyError: 'pop from an empty set'"),
            },
            "update" => {
                for a in &args {
                    for v in it.iterate(a)? {
                        s.borrow_mut().insert(v.key()?, v);
                    }
                }
                Ok(Value::None)
            }
            "union" | "intersection" | "difference" | "issubset" | "issuperset" => {
                let mut others = Vec::new();
                for a in &args {
                    let mut m = IndexMap::new();
                    for v in it.iterate(a)? {
                        m.insert(v.key()?, v);
                    }
                    others.push(m);
                }
                let mine = s.borrow().clone();
                let out: IndexMap<_, _> = match name {
                    "union" => {
                        let mut m = mine;
                        for o in others {
                            m.extend(o);
                        }
                        m
                    }
                    "intersection" => mine.into_iter().filter(|(k, _)| others.iter().all(|o| o.contains_key(k))).collect(),
                    "difference" => mine.into_iter().filter(|(k, _)| others.iter().all(|o| !o.contains_key(k))).collect(),
                    "issubset" => {
                        return Ok(Value::Bool(mine.keys().all(|k| others.iter().all(|o| o.contains_key(k)))))
                    }
                    _ => return Ok(Value::Bool(others.iter().all(|o| o.keys().all(|k| mine.contains_key(k))))),
                };
                Ok(Value::Set(Rc::new(RefCell::new(out))))
            }
            "copy" => Ok(Value::Set(Rc::new(RefCell::new(s.borrow().clone())))),
            "clear" => {
                s.borrow_mut().clear();
                Ok(Value::None)
            }
            _ => missing(),
        },
        Value::Str(s) => match name {
            "join" => {
                arity(&args, 1, 1, name)?;
                let parts: Vec<String> = it.iterate(&args[0])?.iter().map(|v| v.to_string()).collect();
                Ok(Value::str(&parts.join(s)))
            }
            "lower" => Ok(Value::str(&s.to_lowercase())),
            "upper" => Ok(Value::str(&s.to_uppercase())),
            "strip" => Ok(Value::str(s.trim())),
            "startswith" | "endswith" => {
                arity(&args, 1, 1, name)?;
                let p = args[0].to_string();
                Ok(Value::Bool(if name == "startswith" { s.starts_with(&p) } else { s.ends_with(&p) }))
            }
            "format" => {
                let mut out = String::new();
                let mut rest: &str = s;
                let mut next = args.iter();
                while let Some(open) = rest.find('{') {
                    out.push_str(&rest[..open]);
                    let Some(close) = rest[open..].find('}') else { break };
                    if let Some(v) = next.next() {
                        out.push_str(&v.to_string());
                    }
                    rest = &rest[open + close + 1..];
                }
                out.push_str(rest);
                Ok(Value::str(&out))
            }
            _ => missing(),
        },
        Value::Float(f) if name == "is_integer" => Ok(Value::Bool(f.fract() == 0.0)),
        Value::Iter(_) | Value::Tuple(_) if name == "count" || name == "index" => {
            let items = it.iterate(recv)?;
            arity(&args, 1, 1, name)?;
            let pos: Vec<usize> =
                items.iter().enumerate().filter(|(_, v)| v.py_eq(&args[0])).map(|(i, _)| i).collect();
            if name == "count" {
                Ok(Value::Int(pos.len() as i64))
            } else {
                pos.first().map(|&i| Value::Int(i as i64)).ok_or_else(|| GuestError::exec("ValueError: not in tuple"))
            }
        }
        _ => missing(),
    }
}
