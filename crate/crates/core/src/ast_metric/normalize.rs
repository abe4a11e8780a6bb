//! Source → label-normalized ordered tree.
//!
//! Comments never reach the tree (the tokenizer drops them). Imports,
//! decorators, docstrings and type annotations are skipped. Identifiers become
//! `VAR<k>` placeholders numbered by first occurrence inside each top-level
//! definition; numeric literals collapse to `NUM` and string literals to `STR`.
//! Attribute names, keyword-argument names and unshadowable builtins such as
//! `min` or `range` are kept verbatim because they name library behaviour.

use std::collections::HashMap;

use rustpython_parser::ast::{self, Constant, Expr, Stmt};
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};

use super::MetricError;

/// One node of a [`NormalizedTree`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub label: String,
    pub children: Vec<usize>,
}

/// Ordered, labelled, rooted tree stored as an arena.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl NormalizedTree {
    /// A single-node tree.
    pub fn leaf(label: impl Into<String>) -> Self {
        NormalizedTree {
            nodes: vec![TreeNode { label: label.into(), children: Vec::new() }],
            root: 0,
        }
    }

    /// Builds a tree from `(label, children)` pairs; `root` indexes into `nodes`.
    ///
    /// Returns `None` unless the pairs describe a single connected tree
    /// (every node except the root has exactly one parent, no cycles).
    pub fn from_parts(nodes: Vec<TreeNode>, root: usize) -> Option<Self> {
        if root >= nodes.len() {
            return None;
        }
        let mut parents = vec![0usize; nodes.len()];
        for node in &nodes {
            for &c in &node.children {
                if c >= nodes.len() || c == root {
                    return None;
                }
                parents[c] += 1;
            }
        }
        if parents.iter().enumerate().any(|(i, &p)| i != root && p != 1) {
            return None;
        }
        let tree = NormalizedTree { nodes, root };
        (tree.preorder().len() == tree.nodes.len()).then_some(tree)
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Node count |T|.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Post-order node indices (children left to right, then parent).
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((n, expanded)) = stack.pop() {
            if expanded {
                out.push(n);
            } else {
                stack.push((n, true));
                for &c in self.nodes[n].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// S-expression rendering, e.g. `(Module (FunctionDef VAR0 ...))`.
    pub fn to_sexpr(&self) -> String {
        fn go(t: &NormalizedTree, n: usize, out: &mut String) {
            let node = &t.nodes[n];
            if node.children.is_empty() {
                out.push_str(&node.label);
                return;
            }
            out.push('(');
            out.push_str(&node.label);
            for &c in &node.children {
                out.push(' ');
                go(t, c, out);
            }
            out.push(')');
        }
        let mut s = String::new();
        go(self, self.root, &mut s);
        s
    }
}

const BUILTINS: &[&str] = &[
    "abs", "all", "any", "bool", "dict", "divmod", "enumerate", "filter", "float", "int",
    "isinstance", "iter", "len", "list", "map", "max", "min", "next", "pow", "print", "range",
    "reversed", "round", "set", "sorted", "str", "sum", "tuple", "zip", "object", "type",
];

/// Parses `source` and returns its normalized tree.
pub fn normalize(source: &str) -> Result<NormalizedTree, MetricError> {
    let suite = ast::Suite::parse(source, "<candidate>")
        .map_err(|e| MetricError::Parse(e.to_string()))?;
    let mut b = Builder::default();
    let root = b.push("Module");
    let body = strip_docstring(&suite);
    for stmt in body {
        match stmt {
            Stmt::Import(_) | Stmt::ImportFrom(_) => {}
            Stmt::FunctionDef(_) | Stmt::AsyncFunctionDef(_) | Stmt::ClassDef(_) => {
                let saved = std::mem::take(&mut b.names);
                let child = b.stmt(stmt);
                b.names = saved;
                if let Some(c) = child {
                    b.attach(root, c);
                }
            }
            _ => {
                if let Some(c) = b.stmt(stmt) {
                    b.attach(root, c);
                }
            }
        }
    }
    Ok(NormalizedTree { nodes: b.nodes, root })
}

fn strip_docstring(body: &[Stmt]) -> &[Stmt] {
    match body.first() {
        Some(Stmt::Expr(e)) if matches!(&*e.value, Expr::Constant(c) if c.value.is_str()) => {
            &body[1..]
        }
        _ => body,
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<TreeNode>,
    names: HashMap<String, usize>,
}

impl Builder {
    fn push(&mut self, label: impl Into<String>) -> usize {
        self.nodes.push(TreeNode { label: label.into(), children: Vec::new() });
        self.nodes.len() - 1
    }

    fn attach(&mut self, parent: usize, child: usize) {
        self.nodes[parent].children.push(child);
    }

    fn with(&mut self, label: impl Into<String>, children: Vec<usize>) -> usize {
        let n = self.push(label);
        self.nodes[n].children = children;
        n
    }

    fn placeholder(&mut self, name: &str) -> String {
        let next = self.names.len();
        let k = *self.names.entry(name.to_string()).or_insert(next);
        format!("VAR{k}")
    }

    fn ident(&mut self, name: &str) -> usize {
        let label = self.placeholder(name);
        self.push(label)
    }

    fn name_ref(&mut self, name: &str) -> usize {
        if BUILTINS.contains(&name) && !self.names.contains_key(name) {
            self.push(name)
        } else {
            self.ident(name)
        }
    }

    fn block(&mut self, label: &str, body: &[Stmt]) -> usize {
        let children = body.iter().filter_map(|s| self.stmt(s)).collect();
        self.with(label, children)
    }

    fn function(
        &mut self,
        label: &str,
        name: &str,
        args: &ast::Arguments,
        body: &[Stmt],
    ) -> usize {
        let name_node = self.ident(name);
        let args_node = self.arguments(args);
        let mut children = vec![name_node, args_node];
        children.extend(strip_docstring(body).iter().filter_map(|s| self.stmt(s)));
        self.with(label, children)
    }

    fn arguments(&mut self, args: &ast::Arguments) -> usize {
        let mut children = Vec::new();
        let mut defaults = Vec::new();
        for a in args.posonlyargs.iter().chain(&args.args) {
            children.push(self.ident(&a.def.arg));
            if let Some(d) = &a.default {
                defaults.push(self.expr(d));
            }
        }
        if let Some(v) = &args.vararg {
            let p = self.ident(&v.arg);
            children.push(self.with("vararg", vec![p]));
        }
        for a in &args.kwonlyargs {
            let p = self.ident(&a.def.arg);
            let mut kw = vec![p];
            if let Some(d) = &a.default {
                kw.push(self.expr(d));
            }
            children.push(self.with("kwonly", kw));
        }
        if let Some(k) = &args.kwarg {
            let p = self.ident(&k.arg);
            children.push(self.with("kwarg", vec![p]));
        }
        if !defaults.is_empty() {
            children.push(self.with("defaults", defaults));
        }
        self.with("arguments", children)
    }

    fn stmt(&mut self, stmt: &Stmt) -> Option<usize> {
        let node = match stmt {
            Stmt::Import(_) | Stmt::ImportFrom(_) => return None,
            Stmt::FunctionDef(f) => self.function("FunctionDef", &f.name, &f.args, &f.body),
            Stmt::AsyncFunctionDef(f) => {
                self.function("AsyncFunctionDef", &f.name, &f.args, &f.body)
            }
            Stmt::ClassDef(c) => {
                let mut children = vec![self.ident(&c.name)];
                children.extend(c.bases.iter().map(|e| self.expr(e)));
                children.extend(strip_docstring(&c.body).iter().filter_map(|s| self.stmt(s)));
                self.with("ClassDef", children)
            }
            Stmt::Return(r) => {
                let children = r.value.iter().map(|v| self.expr(v)).collect();
                self.with("Return", children)
            }
            Stmt::Delete(d) => {
                let children = d.targets.iter().map(|t| self.expr(t)).collect();
                self.with("Delete", children)
            }
            Stmt::Assign(a) => {
                let mut children: Vec<usize> = a.targets.iter().map(|t| self.expr(t)).collect();
                children.push(self.expr(&a.value));
                self.with("Assign", children)
            }
            Stmt::TypeAlias(_) => self.push("TypeAlias"),
            Stmt::AugAssign(a) => {
                let t = self.expr(&a.target);
                let v = self.expr(&a.value);
                self.with(format!("AugAssign.{:?}", a.op), vec![t, v])
            }
            Stmt::AnnAssign(a) => {
                let mut children = vec![self.expr(&a.target)];
                if let Some(v) = &a.value {
                    children.push(self.expr(v));
                }
                self.with("AnnAssign", children)
            }
            Stmt::For(f) => {
                let t = self.expr(&f.target);
                let i = self.expr(&f.iter);
                let body = self.block("body", &f.body);
                let mut children = vec![t, i, body];
                if !f.orelse.is_empty() {
                    children.push(self.block("orelse", &f.orelse));
                }
                self.with("For", children)
            }
            Stmt::AsyncFor(f) => {
                let t = self.expr(&f.target);
                let i = self.expr(&f.iter);
                let body = self.block("body", &f.body);
                self.with("AsyncFor", vec![t, i, body])
            }
            Stmt::While(w) => {
                let t = self.expr(&w.test);
                let body = self.block("body", &w.body);
                let mut children = vec![t, body];
                if !w.orelse.is_empty() {
                    children.push(self.block("orelse", &w.orelse));
                }
                self.with("While", children)
            }
            Stmt::If(i) => {
                let t = self.expr(&i.test);
                let body = self.block("body", &i.body);
                let mut children = vec![t, body];
                if !i.orelse.is_empty() {
                    children.push(self.block("orelse", &i.orelse));
                }
                self.with("If", children)
            }
            Stmt::With(w) => {
                let mut children = Vec::new();
                for item in &w.items {
                    let mut parts = vec![self.expr(&item.context_expr)];
                    if let Some(v) = &item.optional_vars {
                        parts.push(self.expr(v));
                    }
                    children.push(self.with("withitem", parts));
                }
                children.push(self.block("body", &w.body));
                self.with("With", children)
            }
            Stmt::AsyncWith(w) => {
                let body = self.block("body", &w.body);
                self.with("AsyncWith", vec![body])
            }
            Stmt::Match(m) => {
                let subject = self.expr(&m.subject);
                let cases = m
                    .cases
                    .iter()
                    .map(|c| self.block("match_case", &c.body))
                    .collect::<Vec<_>>();
                let mut children = vec![subject];
                children.extend(cases);
                self.with("Match", children)
            }
            Stmt::Raise(r) => {
                let children = r.exc.iter().map(|e| self.expr(e)).collect();
                self.with("Raise", children)
            }
            Stmt::Try(t) => self.try_stmt("Try", &t.body, &t.handlers, &t.orelse, &t.finalbody),
            Stmt::TryStar(t) => {
                self.try_stmt("TryStar", &t.body, &t.handlers, &t.orelse, &t.finalbody)
            }
            Stmt::Assert(a) => {
                let mut children = vec![self.expr(&a.test)];
                if let Some(m) = &a.msg {
                    children.push(self.expr(m));
                }
                self.with("Assert", children)
            }
            Stmt::Global(g) => {
                let children = g.names.iter().map(|n| self.ident(n)).collect();
                self.with("Global", children)
            }
            Stmt::Nonlocal(g) => {
                let children = g.names.iter().map(|n| self.ident(n)).collect();
                self.with("Nonlocal", children)
            }
            Stmt::Expr(e) => {
                let v = self.expr(&e.value);
                self.with("Expr", vec![v])
            }
            Stmt::Pass(_) => self.push("Pass"),
            Stmt::Break(_) => self.push("Break"),
            Stmt::Continue(_) => self.push("Continue"),
        };
        Some(node)
    }

    fn try_stmt(
        &mut self,
        label: &str,
        body: &[Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[Stmt],
        finalbody: &[Stmt],
    ) -> usize {
        let mut children = vec![self.block("body", body)];
        for h in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = h;
            let mut parts = Vec::new();
            if let Some(t) = &h.type_ {
                parts.push(self.expr(t));
            }
            if let Some(n) = &h.name {
                parts.push(self.ident(n));
            }
            parts.push(self.block("body", &h.body));
            children.push(self.with("ExceptHandler", parts));
        }
        if !orelse.is_empty() {
            children.push(self.block("orelse", orelse));
        }
        if !finalbody.is_empty() {
            children.push(self.block("finalbody", finalbody));
        }
        self.with(label, children)
    }

    fn comprehensions(&mut self, generators: &[ast::Comprehension]) -> Vec<usize> {
        generators
            .iter()
            .map(|g| {
                let mut parts = vec![self.expr(&g.target), self.expr(&g.iter)];
                parts.extend(g.ifs.iter().map(|e| self.expr(e)));
                self.with("comprehension", parts)
            })
            .collect()
    }

    fn exprs(&mut self, label: &str, items: &[Expr]) -> usize {
        let children = items.iter().map(|e| self.expr(e)).collect();
        self.with(label, children)
    }

    fn expr(&mut self, expr: &Expr) -> usize {
        match expr {
            Expr::BoolOp(b) => self.exprs(&format!("BoolOp.{:?}", b.op), &b.values),
            Expr::NamedExpr(n) => {
                let t = self.expr(&n.target);
                let v = self.expr(&n.value);
                self.with("NamedExpr", vec![t, v])
            }
            Expr::BinOp(b) => {
                let l = self.expr(&b.left);
                let r = self.expr(&b.right);
                self.with(format!("BinOp.{:?}", b.op), vec![l, r])
            }
            Expr::UnaryOp(u) => {
                if matches!(u.op, ast::UnaryOp::USub | ast::UnaryOp::UAdd)
                    && is_numeric_constant(&u.operand)
                {
                    return self.push("NUM");
                }
                let o = self.expr(&u.operand);
                self.with(format!("UnaryOp.{:?}", u.op), vec![o])
            }
            Expr::Lambda(l) => {
                let a = self.arguments(&l.args);
                let b = self.expr(&l.body);
                self.with("Lambda", vec![a, b])
            }
            Expr::IfExp(i) => {
                let t = self.expr(&i.test);
                let b = self.expr(&i.body);
                let o = self.expr(&i.orelse);
                self.with("IfExp", vec![t, b, o])
            }
            Expr::Dict(d) => {
                let mut children = Vec::new();
                for (k, v) in d.keys.iter().zip(&d.values) {
                    children.push(match k {
                        Some(k) => self.expr(k),
                        None => self.push("DictUnpack"),
                    });
                    children.push(self.expr(v));
                }
                self.with("Dict", children)
            }
            Expr::Set(s) => self.exprs("Set", &s.elts),
            Expr::ListComp(c) => {
                let mut children = vec![self.expr(&c.elt)];
                children.extend(self.comprehensions(&c.generators));
                self.with("ListComp", children)
            }
            Expr::SetComp(c) => {
                let mut children = vec![self.expr(&c.elt)];
                children.extend(self.comprehensions(&c.generators));
                self.with("SetComp", children)
            }
            Expr::DictComp(c) => {
                let mut children = vec![self.expr(&c.key), self.expr(&c.value)];
                children.extend(self.comprehensions(&c.generators));
                self.with("DictComp", children)
            }
            Expr::GeneratorExp(c) => {
                let mut children = vec![self.expr(&c.elt)];
                children.extend(self.comprehensions(&c.generators));
                self.with("GeneratorExp", children)
            }
            Expr::Await(a) => {
                let v = self.expr(&a.value);
                self.with("Await", vec![v])
            }
            Expr::Yield(y) => {
                let children = y.value.iter().map(|v| self.expr(v)).collect();
                self.with("Yield", children)
            }
            Expr::YieldFrom(y) => {
                let v = self.expr(&y.value);
                self.with("YieldFrom", vec![v])
            }
            Expr::Compare(c) => {
                let ops: Vec<String> = c.ops.iter().map(|o| format!("{o:?}")).collect();
                let mut children = vec![self.expr(&c.left)];
                children.extend(c.comparators.iter().map(|e| self.expr(e)));
                self.with(format!("Compare.{}", ops.join(".")), children)
            }
            Expr::Call(c) => {
                let mut children = vec![self.expr(&c.func)];
                children.extend(c.args.iter().map(|a| self.expr(a)));
                for kw in &c.keywords {
                    let v = self.expr(&kw.value);
                    let label = match &kw.arg {
                        Some(name) => format!("keyword.{name}"),
                        None => "keyword.**".to_string(),
                    };
                    children.push(self.with(label, vec![v]));
                }
                self.with("Call", children)
            }
            Expr::FormattedValue(_) | Expr::JoinedStr(_) => self.push("STR"),
            Expr::Constant(c) => {
                let label = match &c.value {
                    Constant::Int(_) | Constant::Float(_) | Constant::Complex { .. } => "NUM",
                    Constant::Str(_) | Constant::Bytes(_) => "STR",
                    Constant::Bool(true) => "True",
                    Constant::Bool(false) => "False",
                    Constant::None => "None",
                    Constant::Ellipsis => "Ellipsis",
                    Constant::Tuple(_) => "ConstTuple",
                };
                self.push(label)
            }
            Expr::Attribute(a) => {
                let v = self.expr(&a.value);
                self.with(format!("Attribute.{}", a.attr), vec![v])
            }
            Expr::Subscript(s) => {
                let v = self.expr(&s.value);
                let i = self.expr(&s.slice);
                self.with("Subscript", vec![v, i])
            }
            Expr::Starred(s) => {
                let v = self.expr(&s.value);
                self.with("Starred", vec![v])
            }
            Expr::Name(n) => self.name_ref(&n.id),
            Expr::List(l) => self.exprs("List", &l.elts),
            Expr::Tuple(t) => self.exprs("Tuple", &t.elts),
            Expr::Slice(s) => {
                let mut flags = String::from("Slice.");
                let mut children = Vec::new();
                for (part, tag) in [(&s.lower, 'L'), (&s.upper, 'U'), (&s.step, 'S')] {
                    if let Some(p) = part {
                        flags.push(tag);
                        children.push(self.expr(p));
                    } else {
                        flags.push('_');
                    }
                }
                self.with(flags, children)
            }
        }
    }
}

fn is_numeric_constant(expr: &Expr) -> bool {
    matches!(
        expr,
        Expr::Constant(c) if matches!(c.value, Constant::Int(_) | Constant::Float(_) | Constant::Complex { .. })
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sexpr(src: &str) -> String {
        normalize(src).unwrap().to_sexpr()
    }

    #[test]
    fn placeholder_and_literal_collapse() {
        let a = sexpr("def f(a): return a+1");
        let b = sexpr("def g(x): return x+2");
        assert_eq!(a, b);
        assert_eq!(
            a,
            "(Module (FunctionDef VAR0 (arguments VAR1) (Return (BinOp.Add VAR1 NUM))))"
        );
    }

    #[test]
    fn comments_imports_docstrings_are_dropped() {
        let plain = "def f(a):\n    b = a * 2\n    return b\n";
        let noisy = "\"\"\"module doc\"\"\"\nimport math\nfrom heapq import nsmallest\n\n\
                     def f(a):\n    \"\"\"doc\"\"\"\n    # scale\n    b = a * 2  # twice\n    return b\n";
        assert_eq!(sexpr(plain), sexpr(noisy));
    }

    #[test]
    fn decorators_and_annotations_are_ignored() {
        let a = "def f(a):\n    return a\n";
        let b = "@cache\ndef f(a: int) -> int:\n    return a\n";
        assert_eq!(sexpr(a), sexpr(b));
    }

    #[test]
    fn attribute_names_are_structural() {
        assert_ne!(sexpr("import math\ndef f(x): return math.sqrt(x)"), sexpr("import math\ndef f(x): return math.exp(x)"));
        assert_ne!(sexpr("def f(x): return min(x)"), sexpr("def f(x): return max(x)"));
    }

    #[test]
    fn signed_literals_fold_to_num() {
        assert_eq!(sexpr("def f(x): return x * -2.0"), sexpr("def f(x): return x * 3.5"));
        assert_eq!(sexpr("w = -0.5"), sexpr("w = (0.25)"));
    }

    #[test]
    fn parse_error_is_reported() {
        assert!(matches!(normalize("def f(:"), Err(MetricError::Parse(_))));
    }

    #[test]
    fn placeholders_restart_per_top_level_definition() {
        let two = "def f(a):\n    return a\n\ndef g(b):\n    return b\n";
        let t = normalize(two).unwrap();
        assert_eq!(
            t.to_sexpr(),
            "(Module (FunctionDef VAR0 (arguments VAR1) (Return VAR1)) (FunctionDef VAR0 (arguments VAR1) (Return VAR1)))"
        );
    }

    #[test]
    fn slices_record_which_bounds_exist() {
        assert_ne!(sexpr("y = x[1:]"), sexpr("y = x[:1]"));
    }

    #[test]
    fn from_parts_rejects_non_trees() {
        let n = |l: &str, c: Vec<usize>| TreeNode { label: l.into(), children: c };
        assert!(NormalizedTree::from_parts(vec![n("a", vec![1]), n("b", vec![])], 0).is_some());
        assert!(NormalizedTree::from_parts(vec![n("a", vec![1]), n("b", vec![0])], 0).is_none());
        assert!(NormalizedTree::from_parts(vec![n("a", vec![]), n("b", vec![])], 0).is_none());
        assert!(NormalizedTree::from_parts(vec![n("a", vec![1, 1]), n("b", vec![])], 0).is_none());
    }
}
