use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::{Rc, Weak};
use std::time::Instant;

use indexmap::IndexMap;
use rustpython_parser::ast::{self, Constant, Expr, Stmt};

use super::builtins;
use super::value::{Builtin, Function, FunctionBody, ModuleKind, Param, Value};
use super::{GuestError, GuestProgram, Limits};

const MAX_DEPTH: usize = 120;

pub struct Scope<'p> {
    vars: RefCell<HashMap<String, Value<'p>>>,
    parent: Option<Rc<Scope<'p>>>,
    globals: RefCell<Vec<String>>,
    nonlocals: RefCell<Vec<String>>,
}

impl<'p> Scope<'p> {
    fn new(parent: Option<Rc<Scope<'p>>>) -> Rc<Self> {
        Rc::new(Scope {
            vars: RefCell::new(HashMap::new()),
            parent,
            globals: RefCell::new(Vec::new()),
            nonlocals: RefCell::new(Vec::new()),
        })
    }
}

enum Flow<'p> {
    Normal,
    Return(Value<'p>),
    Break,
    Continue,
}

pub type Kwargs<'p> = Vec<(String, Value<'p>)>;

/// Tree-walking evaluator for the subset of Python used by heuristic
/// candidates. Every statement and expression costs one step; exceeding the
/// step budget or the wall-clock deadline aborts with a timeout.
pub struct Interpreter<'p> {
    globals: Rc<Scope<'p>>,
    /// Scopes that captured closures; cleared on drop to break `Rc` cycles.
    captured: Vec<Weak<Scope<'p>>>,
    steps: u64,
    limits: Limits,
    depth: usize,
}

impl Drop for Interpreter<'_> {
    fn drop(&mut self) {
        for scope in self.captured.drain(..) {
            if let Some(s) = scope.upgrade() {
                s.vars.borrow_mut().clear();
            }
        }
        self.globals.vars.borrow_mut().clear();
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, GuestError> {
    Err(GuestError::exec(msg))
}

impl<'p> Interpreter<'p> {
    /// Executes the module body of `program`.
    pub fn load(program: &'p GuestProgram, limits: Limits) -> Result<Self, GuestError> {
        let mut interp = Interpreter {
            globals: Scope::new(None),
            captured: Vec::new(),
            steps: 0,
            limits,
            depth: 0,
        };
        let globals = interp.globals.clone();
        interp.exec_block(program.suite(), &globals)?;
        Ok(interp)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn global(&self, name: &str) -> Option<Value<'p>> {
        self.globals.vars.borrow().get(name).cloned()
    }

    pub fn has_function(&self, name: &str) -> bool {
        matches!(self.global(name), Some(Value::Function(_)))
    }

    /// Calls the module-level callable `name` with positional arguments.
    pub fn call_global(&mut self, name: &str, args: Vec<Value<'p>>) -> Result<Value<'p>, GuestError> {
        let f = self
            .global(name)
            .ok_or_else(|| GuestError::exec(format!("NameError: name '{name}' is not defined")))?;
        self.call(&f, args, Vec::new())
    }

    pub(super) fn charge(&mut self, n: u64) -> Result<(), GuestError> {
        let before = self.steps;
        self.steps = self.steps.saturating_add(n);
        if self.steps > self.limits.step_limit {
            return Err(GuestError::timeout(format!("step budget of {} exhausted", self.limits.step_limit)));
        }
        if before >> 10 != self.steps >> 10 {
            if let Some(deadline) = self.limits.deadline {
                if Instant::now() >= deadline {
                    return Err(GuestError::timeout("wall-clock deadline exceeded"));
                }
            }
        }
        Ok(())
    }

    // ---- names -------------------------------------------------------

    fn lookup(&self, name: &str, scope: &Rc<Scope<'p>>) -> Result<Value<'p>, GuestError> {
        let mut cur = Some(scope);
        while let Some(s) = cur {
            if let Some(v) = s.vars.borrow().get(name) {
                return Ok(v.clone());
            }
            cur = s.parent.as_ref();
        }
        match Builtin::lookup(name) {
            Some(b) => Ok(Value::Builtin(b)),
            None => err(format!("NameError: name '{name}' is not defined")),
        }
    }

    fn store_name(&self, name: &str, value: Value<'p>, scope: &Rc<Scope<'p>>) {
        if scope.globals.borrow().iter().any(|g| g == name) {
            self.globals.vars.borrow_mut().insert(name.to_string(), value);
            return;
        }
        if scope.nonlocals.borrow().iter().any(|g| g == name) {
            let mut cur = scope.parent.as_ref();
            while let Some(s) = cur {
                if s.vars.borrow().contains_key(name) {
                    s.vars.borrow_mut().insert(name.to_string(), value);
                    return;
                }
                cur = s.parent.as_ref();
            }
        }
        scope.vars.borrow_mut().insert(name.to_string(), value);
    }

    fn capture(&mut self, scope: &Rc<Scope<'p>>) {
        if Rc::ptr_eq(scope, &self.globals) {
            return;
        }
        if self.captured.len() >= 1024 {
            self.captured.retain(|w| w.strong_count() > 0);
        }
        self.captured.push(Rc::downgrade(scope));
    }

    // ---- statements --------------------------------------------------

    fn exec_block(&mut self, body: &'p [Stmt], scope: &Rc<Scope<'p>>) -> Result<Flow<'p>, GuestError> {
        for stmt in body {
            match self.exec(stmt, scope)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, stmt: &'p Stmt, scope: &Rc<Scope<'p>>) -> Result<Flow<'p>, GuestError> {
        self.charge(1)?;
        match stmt {
            Stmt::Expr(s) => {
                self.eval(&s.value, scope)?;
            }
            Stmt::Assign(s) => {
                let v = self.eval(&s.value, scope)?;
                for t in &s.targets {
                    self.assign(t, v.clone(), scope)?;
                }
            }
            Stmt::AnnAssign(s) => {
                if let Some(value) = &s.value {
                    let v = self.eval(value, scope)?;
                    self.assign(&s.target, v, scope)?;
                }
            }
            Stmt::AugAssign(s) => self.aug_assign(s, scope)?,
            Stmt::Return(s) => {
                let v = match &s.value {
                    Some(e) => self.eval(e, scope)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::If(s) => {
                let branch = if self.eval(&s.test, scope)?.truthy() { &s.body } else { &s.orelse };
                return self.exec_block(branch, scope);
            }
            Stmt::While(s) => {
                loop {
                    self.charge(1)?;
                    if !self.eval(&s.test, scope)?.truthy() {
                        return self.exec_block(&s.orelse, scope);
                    }
                    match self.exec_block(&s.body, scope)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        _ => {}
                    }
                }
            }
            Stmt::For(s) => return self.exec_for(s, scope),
            Stmt::FunctionDef(def) => {
                let f = self.make_function(def.name.to_string(), &def.args, FunctionBody::Block(&def.body), scope)?;
                self.store_name(&def.name, f, scope);
            }
            Stmt::Pass(_) => {}
            Stmt::Break(_) => return Ok(Flow::Break),
            Stmt::Continue(_) => return Ok(Flow::Continue),
            Stmt::Import(s) => {
                for alias in &s.names {
                    let module = import_module(&alias.name)?;
                    let bound = alias.asname.as_ref().unwrap_or(&alias.name);
                    let bound = bound.split('.').next().unwrap_or(bound);
                    self.store_name(bound, module, scope);
                }
            }
            Stmt::ImportFrom(s) => {
                let module = s.module.as_ref().map(|m| m.as_str()).unwrap_or("");
                for alias in &s.names {
                    let v = import_from(module, &alias.name)?;
                    let bound = alias.asname.as_ref().unwrap_or(&alias.name);
                    self.store_name(bound, v, scope);
                }
            }
            Stmt::Global(s) => scope.globals.borrow_mut().extend(s.names.iter().map(|n| n.to_string())),
            Stmt::Nonlocal(s) => scope.nonlocals.borrow_mut().extend(s.names.iter().map(|n| n.to_string())),
            Stmt::Assert(s) => {
                if !self.eval(&s.test, scope)?.truthy() {
                    return err("AssertionError");
                }
            }
            Stmt::Raise(s) => {
                let msg = match &s.exc {
                    None => "RuntimeError: re-raise".to_string(),
                    Some(e) => self.describe_exception(e, scope)?,
                };
                return err(msg);
            }
            Stmt::Try(s) => return self.exec_try(&s.body, &s.handlers, &s.orelse, &s.finalbody, scope),
            Stmt::Delete(s) => {
                for t in &s.targets {
                    self.delete(t, scope)?;
                }
            }
            Stmt::ClassDef(_) => return err("unsupported statement: class definitions"),
            Stmt::With(_) => return err("unsupported statement: with"),
            _ => return err("unsupported statement"),
        }
        Ok(Flow::Normal)
    }

    fn exec_for(&mut self, s: &'p ast::StmtFor, scope: &Rc<Scope<'p>>) -> Result<Flow<'p>, GuestError> {
        let iterable = self.eval(&s.iter, scope)?;
        macro_rules! body {
            ($item:expr) => {{
                self.assign(&s.target, $item, scope)?;
                match self.exec_block(&s.body, scope)? {
                    Flow::Break => return Ok(Flow::Normal),
                    Flow::Return(v) => return Ok(Flow::Return(v)),
                    _ => {}
                }
            }};
        }
        match iterable {
            Value::Range(start, stop, step) => {
                let mut i = start;
                while (step > 0 && i < stop) || (step < 0 && i > stop) {
                    body!(Value::Int(i));
                    i += step;
                }
            }
            Value::Iter(it) => loop {
                let next = it.borrow_mut().pop_front();
                match next {
                    Some(v) => body!(v),
                    None => break,
                }
            },
            other => {
                for item in self.iterate(&other)? {
                    body!(item);
                }
            }
        }
        self.exec_block(&s.orelse, scope)
    }

    fn exec_try(
        &mut self,
        body: &'p [Stmt],
        handlers: &'p [ast::ExceptHandler],
        orelse: &'p [Stmt],
        finalbody: &'p [Stmt],
        scope: &Rc<Scope<'p>>,
    ) -> Result<Flow<'p>, GuestError> {
        let mut result = self.exec_block(body, scope);
        if let Err(e) = &result {
            if e.is_catchable() {
                let message = e.message.clone();
                for h in handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    if handler_matches(h.type_.as_deref(), &message) {
                        if let Some(name) = &h.name {
                            self.store_name(name, Value::str(&message), scope);
                        }
                        result = self.exec_block(&h.body, scope);
                        break;
                    }
                }
            }
        } else if matches!(result, Ok(Flow::Normal)) {
            result = self.exec_block(orelse, scope);
        }
        if !finalbody.is_empty() {
            match self.exec_block(finalbody, scope)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        result
    }

    fn describe_exception(&mut self, e: &'p Expr, scope: &Rc<Scope<'p>>) -> Result<String, GuestError> {
        Ok(match e {
            Expr::Name(n) => n.id.to_string(),
            Expr::Call(c) => {
                let name = match c.func.as_ref() {
                    Expr::Name(n) => n.id.to_string(),
                    _ => "Exception".to_string(),
                };
                let mut parts = Vec::new();
                for a in &c.args {
                    parts.push(self.eval(a, scope)?.to_string());
                }
                format!("{name}: {}", parts.join(", "))
            }
            other => self.eval(other, scope)?.to_string(),
        })
    }

    fn make_function(
        &mut self,
        name: String,
        args: &'p ast::Arguments,
        body: FunctionBody<'p>,
        scope: &Rc<Scope<'p>>,
    ) -> Result<Value<'p>, GuestError> {
        let mut params = Vec::new();
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            let default = match &a.default {
                Some(d) => Some(self.eval(d, scope)?),
                None => None,
            };
            params.push(Param { name: a.def.arg.to_string(), default });
        }
        if args.kwarg.is_some() {
            return err("unsupported: **kwargs parameters");
        }
        self.capture(scope);
        Ok(Value::Function(Rc::new(Function {
            name,
            params,
            vararg: args.vararg.as_ref().map(|a| a.arg.to_string()),
            body,
            closure: scope.clone(),
        })))
    }

    fn aug_assign(&mut self, s: &'p ast::StmtAugAssign, scope: &Rc<Scope<'p>>) -> Result<(), GuestError> {
        match s.target.as_ref() {
            Expr::Name(n) => {
                let cur = self.lookup(&n.id, scope)?;
                let rhs = self.eval(&s.value, scope)?;
                if let (Value::List(l), ast::Operator::Add) = (&cur, s.op) {
                    let extra = self.iterate(&rhs)?;
                    l.borrow_mut().extend(extra);
                    return Ok(());
                }
                let v = self.binop(s.op, &cur, &rhs)?;
                self.store_name(&n.id, v, scope);
            }
            Expr::Subscript(sub) => {
                let container = self.eval(&sub.value, scope)?;
                let index = self.eval(&sub.slice, scope)?;
                let cur = self.get_item(&container, &index)?;
                let rhs = self.eval(&s.value, scope)?;
                let v = self.binop(s.op, &cur, &rhs)?;
                self.set_item(&container, index, v)?;
            }
            _ => return err("unsupported augmented assignment target"),
        }
        Ok(())
    }

    fn assign(&mut self, target: &'p Expr, value: Value<'p>, scope: &Rc<Scope<'p>>) -> Result<(), GuestError> {
        match target {
            Expr::Name(n) => {
                self.store_name(&n.id, value, scope);
                Ok(())
            }
            Expr::Tuple(ast::ExprTuple { elts, .. }) | Expr::List(ast::ExprList { elts, .. }) => {
                let items = self.iterate(&value)?;
                let star = elts.iter().position(|e| matches!(e, Expr::Starred(_)));
                match star {
                    None => {
                        if items.len() != elts.len() {
                            return err(format!(
                                "ValueError: expected {} values to unpack, got {}",
                                elts.len(),
                                items.len()
                            ));
                        }
                        for (t, v) in elts.iter().zip(items) {
                            self.assign(t, v, scope)?;
                        }
                    }
                    Some(k) => {
                        let after = elts.len() - k - 1;
                        if items.len() < elts.len() - 1 {
                            return err("ValueError: not enough values to unpack");
                        }
                        let mut items = items;
                        let tail = items.split_off(items.len() - after);
                        let middle = items.split_off(k);
                        for (t, v) in elts[..k].iter().zip(items) {
                            self.assign(t, v, scope)?;
                        }
                        if let Expr::Starred(st) = &elts[k] {
                            self.assign(&st.value, Value::list(middle), scope)?;
                        }
                        for (t, v) in elts[k + 1..].iter().zip(tail) {
                            self.assign(t, v, scope)?;
                        }
                    }
                }
                Ok(())
            }
            Expr::Subscript(sub) => {
                let container = self.eval(&sub.value, scope)?;
                if let Expr::Slice(sl) = sub.slice.as_ref() {
                    let (lo, hi, st) = self.eval_slice(sl, scope)?;
                    let items = self.iterate(&value)?;
                    return self.set_slice(&container, lo, hi, st, items);
                }
                let index = self.eval(&sub.slice, scope)?;
                self.set_item(&container, index, value)
            }
            Expr::Starred(_) => err("SyntaxError: starred assignment target must be in a list or tuple"),
            _ => err("unsupported assignment target"),
        }
    }

    fn delete(&mut self, target: &'p Expr, scope: &Rc<Scope<'p>>) -> Result<(), GuestError> {
        match target {
            Expr::Name(n) => {
                scope.vars.borrow_mut().remove(n.id.as_str());
                Ok(())
            }
            Expr::Subscript(sub) => {
                let container = self.eval(&sub.value, scope)?;
                if let Expr::Slice(sl) = sub.slice.as_ref() {
                    let (lo, hi, st) = self.eval_slice(sl, scope)?;
                    if let Value::List(l) = &container {
                        let len = l.borrow().len();
                        let mut idx = slice_indices(len, lo, hi, st)?;
                        idx.sort_unstable();
                        let mut list = l.borrow_mut();
                        for i in idx.into_iter().rev() {
                            list.remove(i);
                        }
                        return Ok(());
                    }
                    return err("TypeError: object does not support slice deletion");
                }
                let index = self.eval(&sub.slice, scope)?;
                match &container {
                    Value::List(l) => {
                        let len = l.borrow().len();
                        let i = normalize_index(&index, len)?;
                        l.borrow_mut().remove(i);
                        Ok(())
                    }
                    Value::Dict(d) => match d.borrow_mut().shift_remove(&index.key()?) {
                        Some(_) => Ok(()),
                        None => err(format!("KeyError: {index}")),
                    },
                    other => err(format!("TypeError: '{}' object does not support item deletion", other.type_name())),
                }
            }
            _ => err("unsupported del target"),
        }
    }

    // ---- expressions -------------------------------------------------

    pub(super) fn eval(&mut self, expr: &'p Expr, scope: &Rc<Scope<'p>>) -> Result<Value<'p>, GuestError> {
        self.charge(1)?;
        match expr {
            Expr::Constant(c) => constant(&c.value),
            Expr::Name(n) => self.lookup(&n.id, scope),
            Expr::BinOp(b) => {
                let l = self.eval(&b.left, scope)?;
                let r = self.eval(&b.right, scope)?;
                self.binop(b.op, &l, &r)
            }
            Expr::UnaryOp(u) => {
                let v = self.eval(&u.operand, scope)?;
                unary(u.op, &v)
            }
            Expr::BoolOp(b) => {
                let mut last = Value::None;
                for (i, e) in b.values.iter().enumerate() {
                    last = self.eval(e, scope)?;
                    let t = last.truthy();
                    let done = match b.op {
                        ast::BoolOp::And => !t,
                        ast::BoolOp::Or => t,
                    };
                    if done || i + 1 == b.values.len() {
                        break;
                    }
                }
                Ok(last)
            }
            Expr::Compare(c) => {
                let mut left = self.eval(&c.left, scope)?;
                for (op, right) in c.ops.iter().zip(&c.comparators) {
                    let right = self.eval(right, scope)?;
                    if !self.compare(*op, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Ok(Value::Bool(true))
            }
            Expr::IfExp(e) => {
                if self.eval(&e.test, scope)?.truthy() {
                    self.eval(&e.body, scope)
                } else {
                    self.eval(&e.orelse, scope)
                }
            }
            Expr::Call(c) => self.eval_call(c, scope),
            Expr::Attribute(a) => {
                let obj = self.eval(&a.value, scope)?;
                attribute(obj, &a.attr)
            }
            Expr::Subscript(s) => {
                let container = self.eval(&s.value, scope)?;
                if let Expr::Slice(sl) = s.slice.as_ref() {
                    let (lo, hi, st) = self.eval_slice(sl, scope)?;
                    return get_slice(&container, lo, hi, st);
                }
                let index = self.eval(&s.slice, scope)?;
                self.get_item(&container, &index)
            }
            Expr::List(l) => Ok(Value::list(self.eval_elts(&l.elts, scope)?)),
            Expr::Tuple(t) => Ok(Value::tuple(self.eval_elts(&t.elts, scope)?)),
            Expr::Set(s) => Value::set_of(self.eval_elts(&s.elts, scope)?),
            Expr::Dict(d) => {
                let mut map = IndexMap::new();
                for (k, v) in d.keys.iter().zip(&d.values) {
                    match k {
                        Some(k) => {
                            let k = self.eval(k, scope)?;
                            let v = self.eval(v, scope)?;
                            map.insert(k.key()?, (k, v));
                        }
                        None => {
                            if let Value::Dict(other) = self.eval(v, scope)? {
                                for (key, pair) in other.borrow().iter() {
                                    map.insert(key.clone(), pair.clone());
                                }
                            } else {
                                return err("TypeError: '**' argument must be a mapping");
                            }
                        }
                    }
                }
                Ok(Value::Dict(Rc::new(RefCell::new(map))))
            }
            Expr::Lambda(l) => self.make_function("<lambda>".into(), &l.args, FunctionBody::Expr(&l.body), scope),
            Expr::ListComp(c) => {
                let mut out = Vec::new();
                self.comprehension(&c.generators, scope, &mut |it, s| {
                    out.push(it.eval(&c.elt, s)?);
                    Ok(())
                })?;
                Ok(Value::list(out))
            }
            Expr::GeneratorExp(c) => {
                let mut out = Vec::new();
                self.comprehension(&c.generators, scope, &mut |it, s| {
                    out.push(it.eval(&c.elt, s)?);
                    Ok(())
                })?;
                Ok(Value::Iter(Rc::new(RefCell::new(out.into()))))
            }
            Expr::SetComp(c) => {
                let mut out = Vec::new();
                self.comprehension(&c.generators, scope, &mut |it, s| {
                    out.push(it.eval(&c.elt, s)?);
                    Ok(())
                })?;
                Value::set_of(out)
            }
            Expr::DictComp(c) => {
                let mut map = IndexMap::new();
                self.comprehension(&c.generators, scope, &mut |it, s| {
                    let k = it.eval(&c.key, s)?;
                    let v = it.eval(&c.value, s)?;
                    map.insert(k.key()?, (k, v));
                    Ok(())
                })?;
                Ok(Value::Dict(Rc::new(RefCell::new(map))))
            }
            Expr::NamedExpr(n) => {
                let v = self.eval(&n.value, scope)?;
                self.assign(&n.target, v.clone(), scope)?;
                Ok(v)
            }
            Expr::JoinedStr(j) => {
                let mut s = String::new();
                for part in &j.values {
                    match part {
                        Expr::FormattedValue(f) => s.push_str(&self.eval(&f.value, scope)?.to_string()),
                        other => s.push_str(&self.eval(other, scope)?.to_string()),
                    }
                }
                Ok(Value::str(&s))
            }
            Expr::FormattedValue(f) => Ok(Value::str(&self.eval(&f.value, scope)?.to_string())),
            Expr::Starred(_) => err("SyntaxError: can't use starred expression here"),
            Expr::Slice(_) => err("unsupported: bare slice"),
            _ => err("unsupported expression"),
        }
    }

    fn eval_elts(&mut self, elts: &'p [Expr], scope: &Rc<Scope<'p>>) -> Result<Vec<Value<'p>>, GuestError> {
        let mut out = Vec::with_capacity(elts.len());
        for e in elts {
            if let Expr::Starred(s) = e {
                let v = self.eval(&s.value, scope)?;
                out.extend(self.iterate(&v)?);
            } else {
                out.push(self.eval(e, scope)?);
            }
        }
        Ok(out)
    }

    fn eval_slice(
        &mut self,
        sl: &'p ast::ExprSlice,
        scope: &Rc<Scope<'p>>,
    ) -> Result<(Option<i64>, Option<i64>, i64), GuestError> {
        let bound = |e: &'p Option<Box<Expr>>, it: &mut Self| -> Result<Option<i64>, GuestError> {
            match e {
                None => Ok(None),
                Some(e) => match it.eval(e, scope)? {
                    Value::None => Ok(None),
                    v => v
                        .as_int()
                        .map(Some)
                        .ok_or_else(|| GuestError::exec("TypeError: slice indices must be integers")),
                },
            }
        };
        let lo = bound(&sl.lower, self)?;
        let hi = bound(&sl.upper, self)?;
        let st = bound(&sl.step, self)?.unwrap_or(1);
        if st == 0 {
            return err("ValueError: slice step cannot be zero");
        }
        Ok((lo, hi, st))
    }

    fn comprehension(
        &mut self,
        gens: &'p [ast::Comprehension],
        scope: &Rc<Scope<'p>>,
        emit: &mut dyn FnMut(&mut Self, &Rc<Scope<'p>>) -> Result<(), GuestError>,
    ) -> Result<(), GuestError> {
        let inner = Scope::new(Some(scope.clone()));
        let result = self.comprehension_level(gens, &inner, emit);
        inner.vars.borrow_mut().clear();
        result
    }

    fn comprehension_level(
        &mut self,
        gens: &'p [ast::Comprehension],
        scope: &Rc<Scope<'p>>,
        emit: &mut dyn FnMut(&mut Self, &Rc<Scope<'p>>) -> Result<(), GuestError>,
    ) -> Result<(), GuestError> {
        let Some((first, rest)) = gens.split_first() else {
            return emit(self, scope);
        };
        let iterable = self.eval(&first.iter, scope)?;
        let items = self.iterate(&iterable)?;
        'items: for item in items {
            self.charge(1)?;
            self.assign(&first.target, item, scope)?;
            for cond in &first.ifs {
                if !self.eval(cond, scope)?.truthy() {
                    continue 'items;
                }
            }
            self.comprehension_level(rest, scope, emit)?;
        }
        Ok(())
    }

    fn eval_call(&mut self, c: &'p ast::ExprCall, scope: &Rc<Scope<'p>>) -> Result<Value<'p>, GuestError> {
        let args = self.eval_elts(&c.args, scope)?;
        let mut kwargs = Vec::with_capacity(c.keywords.len());
        for kw in &c.keywords {
            let v = self.eval(&kw.value, scope)?;
            match &kw.arg {
                Some(name) => kwargs.push((name.to_string(), v)),
                None => match v {
                    Value::Dict(d) => {
                        for (k, val) in d.borrow().values() {
                            kwargs.push((k.to_string(), val.clone()));
                        }
                    }
                    _ => return err("TypeError: argument after ** must be a mapping"),
                },
            }
        }
        if let Expr::Attribute(a) = c.func.as_ref() {
            let recv = self.eval(&a.value, scope)?;
            if !matches!(recv, Value::Module(_)) {
                return builtins::call_method(self, &recv, &a.attr, args, kwargs);
            }
            let f = attribute(recv, &a.attr)?;
            return self.call(&f, args, kwargs);
        }
        let f = self.eval(&c.func, scope)?;
        self.call(&f, args, kwargs)
    }

    pub(super) fn call(
        &mut self,
        f: &Value<'p>,
        args: Vec<Value<'p>>,
        kwargs: Kwargs<'p>,
    ) -> Result<Value<'p>, GuestError> {
        match f {
            Value::Function(func) => self.call_function(func, args, kwargs),
            Value::Builtin(b) => builtins::call_builtin(self, *b, args, kwargs),
            Value::Method(m) => builtins::call_method(self, &m.0, &m.1, args, kwargs),
            other => err(format!("TypeError: '{}' object is not callable", other.type_name())),
        }
    }

    /// Calls `f` with a single positional argument; used for `key=` functions.
    pub(super) fn call1(&mut self, f: &Value<'p>, arg: Value<'p>) -> Result<Value<'p>, GuestError> {
        self.call(f, vec![arg], Vec::new())
    }

    fn call_function(
        &mut self,
        func: &Rc<Function<'p>>,
        args: Vec<Value<'p>>,
        kwargs: Kwargs<'p>,
    ) -> Result<Value<'p>, GuestError> {
        if self.depth >= MAX_DEPTH {
            return err("RecursionError: maximum recursion depth exceeded");
        }
        let scope = Scope::new(Some(func.closure.clone()));
        {
            let mut vars = scope.vars.borrow_mut();
            let n = func.params.len();
            let mut args = args.into_iter();
            let mut bound: Vec<Option<Value<'p>>> = (0..n).map(|_| None).collect();
            for slot in bound.iter_mut() {
                match args.next() {
                    Some(v) => *slot = Some(v),
                    None => break,
                }
            }
            let extra: Vec<Value<'p>> = args.collect();
            match &func.vararg {
                Some(name) => {
                    vars.insert(name.clone(), Value::tuple(extra));
                }
                None if !extra.is_empty() => {
                    return err(format!(
                        "TypeError: {}() takes {} positional arguments but {} were given",
                        func.name,
                        n,
                        n + extra.len()
                    ))
                }
                None => {}
            }
            for (name, v) in kwargs {
                match func.params.iter().position(|p| p.name == name) {
                    Some(i) if bound[i].is_none() => bound[i] = Some(v),
                    Some(_) => {
                        return err(format!("TypeError: {}() got multiple values for argument '{name}'", func.name))
                    }
                    None => {
                        return err(format!("TypeError: {}() got an unexpected keyword argument '{name}'", func.name))
                    }
                }
            }
            for (p, slot) in func.params.iter().zip(bound) {
                let v = match slot.or_else(|| p.default.clone()) {
                    Some(v) => v,
                    None => {
                        return err(format!("TypeError: {}() missing required argument: '{}'", func.name, p.name))
                    }
                };
                vars.insert(p.name.clone(), v);
            }
        }
        self.depth += 1;
        let result = match &func.body {
            FunctionBody::Block(body) => match self.exec_block(body, &scope) {
                Ok(Flow::Return(v)) => Ok(v),
                Ok(_) => Ok(Value::None),
                Err(e) => Err(e),
            },
            FunctionBody::Expr(e) => self.eval(e, &scope),
        };
        self.depth -= 1;
        result
    }

    // ---- operators ---------------------------------------------------

    pub(super) fn binop(&mut self, op: ast::Operator, a: &Value<'p>, b: &Value<'p>) -> Result<Value<'p>, GuestError> {
        use ast::Operator::*;
        if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
            return int_binop(op, x, y);
        }
        if let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) {
            return float_binop(op, x, y);
        }
        match (op, a, b) {
            (Add, Value::Str(x), Value::Str(y)) => Ok(Value::str(&format!("{x}{y}"))),
            (Add, Value::List(x), Value::List(y)) => {
                let mut v = x.borrow().clone();
                v.extend(y.borrow().iter().cloned());
                Ok(Value::list(v))
            }
            (Add, Value::Tuple(x), Value::Tuple(y)) => {
                Ok(Value::tuple(x.iter().chain(y.iter()).cloned().collect()))
            }
            (Mult, Value::List(_) | Value::Tuple(_) | Value::Str(_), n) if n.as_int().is_some() => {
                repeat(a, n.as_int().unwrap_or(0))
            }
            (Mult, n, Value::List(_) | Value::Tuple(_) | Value::Str(_)) if n.as_int().is_some() => {
                repeat(b, n.as_int().unwrap_or(0))
            }
            (Sub | BitOr | BitAnd | BitXor, Value::Set(x), Value::Set(y)) => {
                let (x, y) = (x.borrow(), y.borrow());
                let mut out = IndexMap::new();
                match op {
                    Sub => out.extend(x.iter().filter(|(k, _)| !y.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone()))),
                    BitAnd => out.extend(x.iter().filter(|(k, _)| y.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone()))),
                    BitOr => {
                        out.extend(x.iter().map(|(k, v)| (k.clone(), v.clone())));
                        out.extend(y.iter().map(|(k, v)| (k.clone(), v.clone())));
                    }
                    _ => {
                        out.extend(x.iter().filter(|(k, _)| !y.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())));
                        out.extend(y.iter().filter(|(k, _)| !x.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())));
                    }
                }
                Ok(Value::Set(Rc::new(RefCell::new(out))))
            }
            (Mod, Value::Str(_), _) => err("unsupported: %-formatting"),
            _ => err(format!(
                "TypeError: unsupported operand type(s) for {}: '{}' and '{}'",
                op_symbol(op),
                a.type_name(),
                b.type_name()
            )),
        }
    }

    fn compare(&mut self, op: ast::CmpOp, a: &Value<'p>, b: &Value<'p>) -> Result<bool, GuestError> {
        use ast::CmpOp::*;
        use std::cmp::Ordering::*;
        Ok(match op {
            Eq => a.py_eq(b),
            NotEq => !a.py_eq(b),
            Is => a.py_is(b),
            IsNot => !a.py_is(b),
            In => self.contains(b, a)?,
            NotIn => !self.contains(b, a)?,
            Lt | LtE | Gt | GtE => {
                if let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) {
                    if x.is_nan() || y.is_nan() {
                        return Ok(false);
                    }
                }
                let ord = a.py_cmp(b)?;
                match op {
                    Lt => ord == Less,
                    LtE => ord != Greater,
                    Gt => ord == Greater,
                    _ => ord != Less,
                }
            }
        })
    }

    pub(super) fn contains(&mut self, container: &Value<'p>, item: &Value<'p>) -> Result<bool, GuestError> {
        Ok(match container {
            Value::List(l) => {
                let l = l.borrow();
                self.charge(l.len() as u64)?;
                l.iter().any(|v| v.py_eq(item))
            }
            Value::Tuple(t) => t.iter().any(|v| v.py_eq(item)),
            Value::Set(s) => s.borrow().contains_key(&item.key()?),
            Value::Dict(d) => d.borrow().contains_key(&item.key()?),
            Value::Str(s) => match item {
                Value::Str(sub) => s.contains(sub.as_ref()),
                _ => return err("TypeError: 'in <string>' requires string as left operand"),
            },
            Value::Range(a, b, st) => match item.as_int() {
                Some(i) => {
                    let inside = if *st > 0 { i >= *a && i < *b } else { i <= *a && i > *b };
                    inside && (i - a) % st == 0
                }
                None => false,
            },
            Value::Iter(it) => {
                let items: Vec<Value<'p>> = it.borrow_mut().drain(..).collect();
                items.iter().any(|v| v.py_eq(item))
            }
            other => return err(format!("TypeError: argument of type '{}' is not iterable", other.type_name())),
        })
    }

    /// Materializes any iterable; iterators are consumed.
    pub(super) fn iterate(&mut self, v: &Value<'p>) -> Result<Vec<Value<'p>>, GuestError> {
        let out: Vec<Value<'p>> = match v {
            Value::List(l) => l.borrow().clone(),
            Value::Tuple(t) => t.to_vec(),
            Value::Set(s) => s.borrow().values().cloned().collect(),
            Value::Dict(d) => d.borrow().values().map(|(k, _)| k.clone()).collect(),
            Value::Str(s) => s.chars().map(|c| Value::str(&c.to_string())).collect(),
            Value::Range(a, b, st) => {
                let n = super::value::range_len(*a, *b, *st);
                self.charge(n.max(0) as u64)?;
                (0..n).map(|i| Value::Int(a + i * st)).collect()
            }
            Value::Iter(it) => it.borrow_mut().drain(..).collect(),
            other => return err(format!("TypeError: '{}' object is not iterable", other.type_name())),
        };
        self.charge(out.len() as u64 / 8)?;
        Ok(out)
    }

    pub(super) fn get_item(&mut self, container: &Value<'p>, index: &Value<'p>) -> Result<Value<'p>, GuestError> {
        match container {
            Value::List(l) => {
                let l = l.borrow();
                let i = normalize_index(index, l.len())?;
                Ok(l[i].clone())
            }
            Value::Tuple(t) => {
                let i = normalize_index(index, t.len())?;
                Ok(t[i].clone())
            }
            Value::Str(s) => {
                let chars: Vec<char> = s.chars().collect();
                let i = normalize_index(index, chars.len())?;
                Ok(Value::str(&chars[i].to_string()))
            }
            Value::Dict(d) => match d.borrow().get(&index.key()?) {
                Some((_, v)) => Ok(v.clone()),
                None => err(format!("KeyError: {index}")),
            },
            Value::Range(a, b, st) => {
                let n = super::value::range_len(*a, *b, *st) as usize;
                let i = normalize_index(index, n)?;
                Ok(Value::Int(a + i as i64 * st))
            }
            other => err(format!("TypeError: '{}' object is not subscriptable", other.type_name())),
        }
    }

    fn set_item(&mut self, container: &Value<'p>, index: Value<'p>, value: Value<'p>) -> Result<(), GuestError> {
        match container {
            Value::List(l) => {
                let len = l.borrow().len();
                let i = normalize_index(&index, len)?;
                l.borrow_mut()[i] = value;
                Ok(())
            }
            Value::Dict(d) => {
                let k = index.key()?;
                let mut d = d.borrow_mut();
                match d.get_mut(&k) {
                    Some(slot) => slot.1 = value,
                    None => {
                        d.insert(k, (index, value));
                    }
                }
                Ok(())
            }
            other => err(format!("TypeError: '{}' object does not support item assignment", other.type_name())),
        }
    }

    fn set_slice(
        &mut self,
        container: &Value<'p>,
        lo: Option<i64>,
        hi: Option<i64>,
        step: i64,
        items: Vec<Value<'p>>,
    ) -> Result<(), GuestError> {
        let Value::List(l) = container else {
            return err(format!("TypeError: '{}' object does not support slice assignment", container.type_name()));
        };
        let len = l.borrow().len();
        if step == 1 {
            let (start, stop) = clamp_bounds(len, lo, hi);
            let stop = stop.max(start);
            l.borrow_mut().splice(start..stop, items);
            return Ok(());
        }
        let idx = slice_indices(len, lo, hi, step)?;
        if idx.len() != items.len() {
            return err(format!(
                "ValueError: attempt to assign sequence of size {} to extended slice of size {}",
                items.len(),
                idx.len()
            ));
        }
        let mut list = l.borrow_mut();
        for (i, v) in idx.into_iter().zip(items) {
            list[i] = v;
        }
        Ok(())
    }
}

fn handler_matches(type_: Option<&Expr>, message: &str) -> bool {
    fn names(e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Name(n) => out.push(n.id.to_string()),
            Expr::Attribute(a) => out.push(a.attr.to_string()),
            Expr::Tuple(t) => t.elts.iter().for_each(|x| names(x, out)),
            _ => out.push("Exception".into()),
        }
    }
    let Some(t) = type_ else { return true };
    let mut list = Vec::new();
    names(t, &mut list);
    list.iter().any(|n| {
        n == "Exception"
            || n == "BaseException"
            || message.starts_with(n.as_str())
            || (n == "ArithmeticError" && (message.starts_with("ZeroDivisionError") || message.starts_with("OverflowError")))
            || (n == "LookupError" && (message.starts_with("IndexError") || message.starts_with("KeyError")))
    })
}

fn import_module<'p>(name: &str) -> Result<Value<'p>, GuestError> {
    match name {
        "math" => Ok(Value::Module(ModuleKind::Math)),
        "heapq" => Ok(Value::Module(ModuleKind::Heapq)),
        "typing" | "__future__" => Ok(Value::None),
        other => err(format!("ImportError: module '{other}' is not available")),
    }
}

fn import_from<'p>(module: &str, name: &str) -> Result<Value<'p>, GuestError> {
    match module {
        "math" => attribute(Value::Module(ModuleKind::Math), name),
        "heapq" => attribute(Value::Module(ModuleKind::Heapq), name),
        "typing" | "__future__" => Ok(Value::None),
        other => err(format!("ImportError: module '{other}' is not available")),
    }
}

pub(super) fn attribute<'p>(obj: Value<'p>, name: &str) -> Result<Value<'p>, GuestError> {
    match &obj {
        Value::Module(ModuleKind::Math) => {
            let constant = match name {
                "pi" => Some(std::f64::consts::PI),
                "e" => Some(std::f64::consts::E),
                "tau" => Some(std::f64::consts::TAU),
                "inf" => Some(f64::INFINITY),
                "nan" => Some(f64::NAN),
                _ => None,
            };
            if let Some(c) = constant {
                return Ok(Value::Float(c));
            }
            match super::value::MATH_FUNCTIONS.iter().find(|f| **f == name) {
                Some(f) => Ok(Value::Builtin(Builtin::Math(f))),
                None => err(format!("AttributeError: module 'math' has no attribute '{name}'")),
            }
        }
        Value::Module(ModuleKind::Heapq) => match super::value::HEAPQ_FUNCTIONS.iter().find(|f| **f == name) {
            Some(f) => Ok(Value::Builtin(Builtin::Heapq(f))),
            None => err(format!("AttributeError: module 'heapq' has no attribute '{name}'")),
        },
        _ => Ok(Value::Method(Rc::new((obj, name.to_string())))),
    }
}

fn constant<'p>(c: &Constant) -> Result<Value<'p>, GuestError> {
    Ok(match c {
        Constant::None => Value::None,
        Constant::Bool(b) => Value::Bool(*b),
        Constant::Int(i) => match i64::try_from(i) {
            Ok(v) => Value::Int(v),
            Err(_) => return err("OverflowError: integer literal too large"),
        },
        Constant::Float(f) => Value::Float(*f),
        Constant::Str(s) => Value::str(s),
        Constant::Tuple(items) => Value::tuple(items.iter().map(constant).collect::<Result<_, _>>()?),
        _ => return err("unsupported literal"),
    })
}

fn unary<'p>(op: ast::UnaryOp, v: &Value<'p>) -> Result<Value<'p>, GuestError> {
    use ast::UnaryOp::*;
    match (op, v) {
        (Not, v) => Ok(Value::Bool(!v.truthy())),
        (USub, Value::Float(f)) => Ok(Value::Float(-f)),
        (UAdd, Value::Float(f)) => Ok(Value::Float(*f)),
        (USub, v) if v.as_int().is_some() => match v.as_int().unwrap_or(0).checked_neg() {
            Some(n) => Ok(Value::Int(n)),
            None => err("OverflowError: integer overflow"),
        },
        (UAdd, v) if v.as_int().is_some() => Ok(Value::Int(v.as_int().unwrap_or(0))),
        (Invert, v) if v.as_int().is_some() => Ok(Value::Int(!v.as_int().unwrap_or(0))),
        (_, v) => err(format!("TypeError: bad operand type for unary operator: '{}'", v.type_name())),
    }
}

fn op_symbol(op: ast::Operator) -> &'static str {
    use ast::Operator::*;
    match op {
        Add => "+",
        Sub => "-",
        Mult => "*",
        MatMult => "@",
        Div => "/",
        Mod => "%",
        Pow => "**",
        LShift => "<<",
        RShift => ">>",
        BitOr => "|",
        BitXor => "^",
        BitAnd => "&",
        FloorDiv => "//",
    }
}

fn overflow<T>() -> Result<T, GuestError> {
    err("OverflowError: integer overflow")
}

pub(super) fn int_floor_div(a: i64, b: i64) -> Result<i64, GuestError> {
    if b == 0 {
        return err("ZeroDivisionError: integer division or modulo by zero");
    }
    let q = a.checked_div(b).map_or_else(overflow, Ok)?;
    Ok(if a % b != 0 && ((a < 0) != (b < 0)) { q - 1 } else { q })
}

pub(super) fn int_mod(a: i64, b: i64) -> Result<i64, GuestError> {
    if b == 0 {
        return err("ZeroDivisionError: integer division or modulo by zero");
    }
    let r = a.checked_rem(b).unwrap_or(0);
    Ok(if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r })
}

pub(super) fn float_divmod(a: f64, b: f64) -> Result<(f64, f64), GuestError> {
    if b == 0.0 {
        return err("ZeroDivisionError: float divmod()");
    }
    let mut m = a % b;
    let mut div = (a - m) / b;
    if m != 0.0 {
        if (b < 0.0) != (m < 0.0) {
            m += b;
            div -= 1.0;
        }
    } else {
        m = 0.0f64.copysign(b);
    }
    let floordiv = if div != 0.0 {
        let mut f = div.floor();
        if div - f > 0.5 {
            f += 1.0;
        }
        f
    } else {
        0.0f64.copysign(a / b)
    };
    Ok((floordiv, m))
}

fn int_binop<'p>(op: ast::Operator, x: i64, y: i64) -> Result<Value<'p>, GuestError> {
    use ast::Operator::*;
    let checked = |r: Option<i64>| r.map(Value::Int).map_or_else(overflow, Ok);
    match op {
        Add => checked(x.checked_add(y)),
        Sub => checked(x.checked_sub(y)),
        Mult => checked(x.checked_mul(y)),
        Div => {
            if y == 0 {
                return err("ZeroDivisionError: division by zero");
            }
            Ok(Value::Float(x as f64 / y as f64))
        }
        FloorDiv => Ok(Value::Int(int_floor_div(x, y)?)),
        Mod => Ok(Value::Int(int_mod(x, y)?)),
        Pow => {
            if y < 0 {
                return float_binop(op, x as f64, y as f64);
            }
            let e = u32::try_from(y).map_or_else(|_| overflow(), Ok)?;
            checked(x.checked_pow(e))
        }
        LShift => {
            if y < 0 {
                return err("ValueError: negative shift count");
            }
            let r = if y >= 64 { None } else { x.checked_mul(1i64 << y.min(62)).filter(|_| y < 63) };
            checked(r)
        }
        RShift => {
            if y < 0 {
                return err("ValueError: negative shift count");
            }
            Ok(Value::Int(x >> y.min(63)))
        }
        BitOr => Ok(Value::Int(x | y)),
        BitAnd => Ok(Value::Int(x & y)),
        BitXor => Ok(Value::Int(x ^ y)),
        MatMult => err("TypeError: unsupported operand type(s) for @"),
    }
}

fn float_binop<'p>(op: ast::Operator, x: f64, y: f64) -> Result<Value<'p>, GuestError> {
    use ast::Operator::*;
    Ok(Value::Float(match op {
        Add => x + y,
        Sub => x - y,
        Mult => x * y,
        Div => {
            if y == 0.0 {
                return err("ZeroDivisionError: float division by zero");
            }
            x / y
        }
        FloorDiv => float_divmod(x, y)?.0,
        Mod => float_divmod(x, y)?.1,
        Pow => {
            if x == 0.0 && y < 0.0 {
                return err("ZeroDivisionError: 0.0 cannot be raised to a negative power");
            }
            if x < 0.0 && y.fract() != 0.0 && y.is_finite() {
                return err("ValueError: negative number raised to a fractional power");
            }
            let r = x.powf(y);
            if r.is_infinite() && x.is_finite() && y.is_finite() {
                return err("OverflowError: (34, 'Numerical result out of range')");
            }
            r
        }
        _ => {
            return err(format!(
                "TypeError: unsupported operand type(s) for {}: 'float' and 'float'",
                op_symbol(op)
            ))
        }
    }))
}

fn repeat<'p>(seq: &Value<'p>, n: i64) -> Result<Value<'p>, GuestError> {
    let n = n.max(0) as usize;
    match seq {
        Value::List(l) => {
            let l = l.borrow();
            if l.len().saturating_mul(n) > 50_000_000 {
                return err("MemoryError");
            }
            Ok(Value::list(l.iter().cloned().cycle().take(l.len() * n).collect()))
        }
        Value::Tuple(t) => Ok(Value::tuple(t.iter().cloned().cycle().take(t.len() * n).collect())),
        Value::Str(s) => Ok(Value::str(&s.repeat(n))),
        _ => err("TypeError: can't multiply sequence"),
    }
}

pub(super) fn normalize_index(index: &Value<'_>, len: usize) -> Result<usize, GuestError> {
    let Some(i) = index.as_int() else {
        return err(format!("TypeError: indices must be integers, not {}", index.type_name()));
    };
    let j = if i < 0 { i + len as i64 } else { i };
    if j < 0 || j >= len as i64 {
        return err("IndexError: index out of range");
    }
    Ok(j as usize)
}

fn clamp_bounds(len: usize, lo: Option<i64>, hi: Option<i64>) -> (usize, usize) {
    let len_i = len as i64;
    let fix = |v: i64| if v < 0 { (v + len_i).max(0) } else { v.min(len_i) };
    let start = lo.map_or(0, fix) as usize;
    let stop = hi.map_or(len_i, fix) as usize;
    (start, stop)
}

pub(super) fn slice_indices(len: usize, lo: Option<i64>, hi: Option<i64>, step: i64) -> Result<Vec<usize>, GuestError> {
    if step == 0 {
        return err("ValueError: slice step cannot be zero");
    }
    let len_i = len as i64;
    let mut out = Vec::new();
    if step > 0 {
        let (start, stop) = clamp_bounds(len, lo, hi);
        let mut i = start as i64;
        while i < stop as i64 {
            out.push(i as usize);
            i += step;
        }
    } else {
        let fix = |v: i64, default: i64| -> i64 {
            if v < 0 {
                (v + len_i).max(-1)
            } else {
                v.min(len_i - 1)
            }
            .max(default.min(-1))
        };
        let start = lo.map_or(len_i - 1, |v| fix(v, -1));
        let stop = hi.map_or(-1, |v| fix(v, -1));
        let mut i = start;
        while i > stop {
            out.push(i as usize);
            i += step;
        }
    }
    Ok(out)
}

fn get_slice<'p>(container: &Value<'p>, lo: Option<i64>, hi: Option<i64>, step: i64) -> Result<Value<'p>, GuestError> {
    match container {
        Value::List(l) => {
            let l = l.borrow();
            let idx = slice_indices(l.len(), lo, hi, step)?;
            Ok(Value::list(idx.into_iter().map(|i| l[i].clone()).collect()))
        }
        Value::Tuple(t) => {
            let idx = slice_indices(t.len(), lo, hi, step)?;
            Ok(Value::tuple(idx.into_iter().map(|i| t[i].clone()).collect()))
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let idx = slice_indices(chars.len(), lo, hi, step)?;
            Ok(Value::str(&idx.into_iter().map(|i| chars[i]).collect::<String>()))
        }
        Value::Range(a, b, st) => {
            let n = super::value::range_len(*a, *b, *st) as usize;
            let idx = slice_indices(n, lo, hi, step)?;
            Ok(Value::list(idx.into_iter().map(|i| Value::Int(a + i as i64 * st)).collect()))
        }
        other => err(format!("TypeError: '{}' object is not subscriptable", other.type_name())),
    }
}
