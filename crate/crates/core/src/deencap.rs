//! De-encapsulation: a public setter for every field of every class.
//!
//! Synthesized nodes get ids above the original program's maximum, so every
//! user-code node keeps its id and one mutant catalog indexes both variants.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::frontend::ast::*;
use crate::mutation::MutantCatalog;

#[derive(Debug, Clone)]
pub struct DeencapResult {
    pub program: Program,
    /// Every node id inside synthesized setters.
    pub synthetic_regions: BTreeSet<NodeId>,
    /// (class, field) → setter method name.
    pub setter_index: BTreeMap<(String, String), String>,
}

impl DeencapResult {
    pub fn setter_for(&self, class: &str, field: &str) -> Option<&str> {
        self.setter_index.get(&(class.to_string(), field.to_string())).map(String::as_str)
    }

    /// The augmented program with all synthesized members removed.
    pub fn stripped(&self) -> Program {
        let mut p = self.program.clone();
        for class in &mut p.classes {
            class.methods.retain(|m| !self.synthetic_regions.contains(&m.id));
        }
        p
    }
}

pub fn synthesize_setters(p: &Program) -> DeencapResult {
    let mut program = p.clone();
    let mut next = p.max_node_id().map_or(0, |id| id.0 + 1);
    let mut synthetic_regions = BTreeSet::new();
    let mut setter_index = BTreeMap::new();

    for class in &mut program.classes {
        let mut taken: HashSet<String> = class.methods.iter().map(|m| m.name.clone()).collect();
        let mut setters = Vec::new();
        for field in &class.fields {
            let base = format!("set__{}", field.name);
            let mut name = base.clone();
            let mut suffix = 1;
            while taken.contains(&name) {
                name = format!("{base}_{suffix}");
                suffix += 1;
            }
            taken.insert(name.clone());
            let param = if field.name == "v" { "v_" } else { "v" };
            let mut setter = setter_decl(&name, field, param);
            renumber_method(&mut setter, &mut next);
            visit_method(&setter, &mut |n| {
                synthetic_regions.insert(n.id());
            });
            setter_index.insert((class.name.clone(), field.name.clone()), name);
            setters.push(setter);
        }
        class.methods.extend(setters);
    }
    DeencapResult { program, synthetic_regions, setter_index }
}

fn setter_decl(name: &str, field: &FieldDecl, param: &str) -> MethodDecl {
    let placeholder = NodeId(0);
    let span = Span::default();
    let expr = |kind| Expr { id: placeholder, span, kind };
    MethodDecl {
        id: placeholder,
        span,
        name: name.to_string(),
        visibility: Visibility::Public,
        params: vec![Param { id: placeholder, span, name: param.to_string(), ty: field.ty.clone() }],
        ret: Type::Void,
        body: vec![Stmt {
            id: placeholder,
            span,
            kind: StmtKind::Assign {
                target: expr(ExprKind::Var(field.name.clone())),
                value: expr(ExprKind::Var(param.to_string())),
            },
        }],
        is_constructor: false,
    }
}

/// Drops mutants located in synthesized code; retained ids are unchanged.
pub fn filter_synthetic(catalog: &MutantCatalog) -> MutantCatalog {
    catalog.without_synthetic()
}
