use std::collections::BTreeSet;
use std::sync::Arc;

use crate::logic::{DomainSizes, RelId, Signature, Structure};
use crate::model::{Feature, FunctionFamily, Model, NodeSpec, PartitionCase};

use super::formula::{
    is_keyword, parse_freq_term, parse_raw_formula, rational_from_text, Resolver, Tokens,
};
use super::lexer::Tok;
use super::SourceError;

/// Parse a model file: sort and relation declarations followed by one node
/// per relation. DAG edges are inferred from the relations each node
/// mentions, merged with any explicit `parents:` clause; cycles are
/// rejected.
pub fn parse_model(text: &str) -> Result<Model, SourceError> {
    let mut ts = Tokens::new(text)?;
    let mut sig = Signature::new();

    // declarations
    loop {
        if ts.at_keyword("sort") {
            let t = ts.peek().clone();
            ts.next();
            let (name, l, c) = ts.expect_ident()?;
            if is_keyword(&name) {
                return Err(SourceError::new(l, c, format!("`{}` is a reserved word", name)));
            }
            sig.add_sort(&name)
                .map_err(|e| SourceError::new(t.line, t.column, e.to_string()))?;
            ts.expect(Tok::Semi)?;
        } else if ts.at_keyword("relation") {
            let t = ts.peek().clone();
            ts.next();
            let (name, l, c) = ts.expect_ident()?;
            if is_keyword(&name) {
                return Err(SourceError::new(l, c, format!("`{}` is a reserved word", name)));
            }
            ts.expect(Tok::LParen)?;
            let mut sorts = Vec::new();
            if !ts.eat(&Tok::RParen) {
                loop {
                    let (sname, sl, sc) = ts.expect_ident()?;
                    let sid = sig
                        .sort_id(&sname)
                        .ok_or_else(|| SourceError::new(sl, sc, format!("unknown sort `{}`", sname)))?;
                    sorts.push(sid);
                    if ts.eat(&Tok::RParen) {
                        break;
                    }
                    ts.expect(Tok::Comma)?;
                }
            }
            sig.add_relation(&name, sorts)
                .map_err(|e| SourceError::new(t.line, t.column, e.to_string()))?;
            ts.expect(Tok::Semi)?;
        } else {
            break;
        }
    }

    let sig = Arc::new(sig);
    let mut nodes: Vec<Option<NodeSpec>> = vec![None; sig.relation_count()];
    let mut extra_parents: Vec<BTreeSet<RelId>> = vec![BTreeSet::new(); sig.relation_count()];

    while ts.at_keyword("node") {
        ts.next();
        let (name, nl, nc) = ts.expect_ident()?;
        let rel = sig
            .rel_id(&name)
            .ok_or_else(|| SourceError::new(nl, nc, format!("unknown relation `{}`", name)))?;
        if nodes[rel.0].is_some() {
            return Err(SourceError::new(nl, nc, format!("duplicate node for `{}`", name)));
        }
        ts.expect(Tok::LBrace)?;
        if ts.at_keyword("parents") {
            ts.next();
            ts.expect(Tok::Colon)?;
            loop {
                let (pname, pl, pc) = ts.expect_ident()?;
                let pid = sig
                    .rel_id(&pname)
                    .ok_or_else(|| SourceError::new(pl, pc, format!("unknown relation `{}`", pname)))?;
                extra_parents[rel.0].insert(pid);
                if !ts.eat(&Tok::Comma) {
                    break;
                }
            }
            ts.expect(Tok::Semi)?;
        }
        let spec = if ts.at_keyword("case") {
            parse_cases(&mut ts, &sig, rel)?
        } else {
            parse_functional(&mut ts, &sig, rel)?
        };
        ts.expect(Tok::RBrace)?;
        nodes[rel.0] = Some(spec);
    }
    ts.expect_eof()?;

    for (i, n) in nodes.iter().enumerate() {
        if n.is_none() {
            return Err(SourceError::new(
                1,
                1,
                format!("relation `{}` has no node", sig.relation(RelId(i)).name),
            ));
        }
    }
    let nodes: Vec<NodeSpec> = nodes.into_iter().map(|n| n.unwrap()).collect();
    Model::new(sig, nodes, extra_parents).map_err(|e| SourceError::new(1, 1, e.to_string()))
}

/// Resolver pre-seeded with the node's argument variables x1..xk.
fn node_resolver<'a>(sig: &'a Signature, rel: RelId) -> Resolver<'a> {
    let mut r = Resolver::new(sig);
    for (i, s) in sig.relation(rel).arg_sorts.iter().enumerate() {
        r.declare_free(&format!("x{}", i + 1), *s);
    }
    r
}

/// A node formula may only leave the argument variables x1..xk free.
fn check_node_scope(
    resolver: &Resolver<'_>,
    arity: usize,
    line: u32,
    column: u32,
) -> Result<(), SourceError> {
    for (name, _) in &resolver.free {
        let ok = (1..=arity).any(|i| name == &format!("x{}", i));
        if !ok {
            return Err(SourceError::new(
                line,
                column,
                format!(
                    "variable `{}` is free in a node formula; only the argument variables x1..x{} may be free",
                    name, arity
                ),
            ));
        }
    }
    Ok(())
}

fn parse_cases(ts: &mut Tokens, sig: &Signature, rel: RelId) -> Result<NodeSpec, SourceError> {
    let mut cases = Vec::new();
    while ts.at_keyword("case") {
        let at = ts.peek().clone();
        ts.next();
        let raw = parse_raw_formula(ts)?;
        ts.expect(Tok::FatArrow)?;
        let (num, l, c) = ts.expect_number()?;
        let prob = rational_from_text(&num, l, c)?;
        ts.expect(Tok::Semi)?;
        let mut resolver = node_resolver(sig, rel);
        let formula = resolver.resolve(&raw)?;
        check_node_scope(&resolver, sig.relation(rel).arity(), at.line, at.column)?;
        cases.push(PartitionCase { formula, prob });
    }
    Ok(NodeSpec::Partition { cases })
}

fn parse_functional(ts: &mut Tokens, sig: &Signature, rel: RelId) -> Result<NodeSpec, SourceError> {
    let mut features = Vec::new();
    while ts.at_keyword("feature") {
        let at = ts.peek().clone();
        ts.next();
        let (fname, _, _) = ts.expect_ident()?;
        ts.expect(Tok::Eq)?;
        let raw = parse_freq_term(ts)?;
        ts.expect(Tok::Semi)?;
        let mut resolver = node_resolver(sig, rel);
        let (formula, condition, binders) = resolver.resolve_feature(&raw)?;
        check_node_scope(&resolver, sig.relation(rel).arity(), at.line, at.column)?;
        features.push(Feature {
            name: fname,
            formula,
            condition,
            binders,
        });
    }
    ts.expect_keyword("function")?;
    ts.expect(Tok::Colon)?;
    let family = parse_family(ts, features.len())?;
    ts.expect(Tok::Semi)?;
    Ok(NodeSpec::Functional { features, family })
}

fn expect_f64(ts: &mut Tokens) -> Result<f64, SourceError> {
    let (text, l, c) = ts.expect_number()?;
    text.parse::<f64>()
        .map_err(|_| SourceError::new(l, c, format!("expected a decimal number, got `{}`", text)))
}

fn parse_family(ts: &mut Tokens, n_features: usize) -> Result<FunctionFamily, SourceError> {
    let (kind, kl, kc) = ts.expect_ident()?;
    ts.expect(Tok::LParen)?;
    let fam = match kind.as_str() {
        "constant" => {
            let p = expect_f64(ts)?;
            FunctionFamily::constant(p)
        }
        "linear" | "logistic" | "probit" | "cloglog" => {
            // weights..., c=NUM
            let mut weights = Vec::new();
            let c;
            loop {
                if ts.at_keyword("c") || matches!(&ts.peek().tok, Tok::Ident(s) if s == "c") {
                    ts.next();
                    ts.expect(Tok::Eq)?;
                    c = expect_f64(ts)?;
                    break;
                }
                weights.push(expect_f64(ts)?);
                ts.expect(Tok::Comma)?;
            }
            match kind.as_str() {
                "linear" => FunctionFamily::linear(&weights, c),
                "logistic" => FunctionFamily::logistic(&weights, c),
                "probit" => FunctionFamily::probit(&weights, c),
                _ => FunctionFamily::cloglog(&weights, c),
            }
        }
        "bump" => {
            let mut alpha = None;
            let mut beta = None;
            let mut p = None;
            loop {
                let (pname, pl, pc) = ts.expect_ident()?;
                ts.expect(Tok::Eq)?;
                let v = expect_f64(ts)?;
                match pname.as_str() {
                    "alpha" => alpha = Some(v),
                    "beta" => beta = Some(v),
                    "p" => p = Some(v),
                    other => {
                        return Err(SourceError::new(
                            pl,
                            pc,
                            format!("unknown bump parameter `{}`", other),
                        ))
                    }
                }
                if !ts.eat(&Tok::Comma) {
                    break;
                }
            }
            match (alpha, beta, p) {
                (Some(a), Some(b), Some(p)) => FunctionFamily::bump(a, b, p),
                _ => {
                    return Err(SourceError::new(
                        kl,
                        kc,
                        "bump requires parameters alpha, beta and p",
                    ))
                }
            }
        }
        "table" => {
            let mut values = vec![None; 1usize << n_features];
            loop {
                let (bits, bl, bc) = ts.expect_number()?;
                if bits.len() != n_features || !bits.chars().all(|c| c == '0' || c == '1') {
                    return Err(SourceError::new(
                        bl,
                        bc,
                        format!("table pattern `{}` must be {} bits", bits, n_features),
                    ));
                }
                let mut idx = 0usize;
                for (i, ch) in bits.chars().enumerate() {
                    if ch == '1' {
                        idx |= 1 << i;
                    }
                }
                ts.expect(Tok::FatArrow)?;
                let v = expect_f64(ts)?;
                if values[idx].replace(v).is_some() {
                    return Err(SourceError::new(bl, bc, format!("duplicate table pattern `{}`", bits)));
                }
                if !ts.eat(&Tok::Comma) {
                    break;
                }
            }
            if values.iter().any(|v| v.is_none()) {
                return Err(SourceError::new(
                    kl,
                    kc,
                    format!("table must cover all {} patterns", 1usize << n_features),
                ));
            }
            FunctionFamily::table(n_features, values.into_iter().map(|v| v.unwrap()).collect())
        }
        other => {
            return Err(SourceError::new(
                kl,
                kc,
                format!("unknown function family `{}`", other),
            )
            .expecting(
                ["constant", "linear", "logistic", "probit", "cloglog", "bump", "table"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            ))
        }
    };
    ts.expect(Tok::RParen)?;
    Ok(fam)
}

/// Parse a structure file against a known signature: `domain` lines for
/// every sort, then `fact` lines.
pub fn parse_structure(text: &str, signature: &Arc<Signature>) -> Result<Structure, SourceError> {
    let mut ts = Tokens::new(text)?;
    let mut sizes: Vec<Option<usize>> = vec![None; signature.sort_count()];
    while ts.at_keyword("domain") {
        ts.next();
        let (sname, sl, sc) = ts.expect_ident()?;
        let sid = signature
            .sort_id(&sname)
            .ok_or_else(|| SourceError::new(sl, sc, format!("unknown sort `{}`", sname)))?;
        ts.expect(Tok::Eq)?;
        let (num, nl, nc) = ts.expect_number()?;
        let n = num
            .parse::<usize>()
            .map_err(|_| SourceError::new(nl, nc, "domain size must be a non-negative integer"))?;
        if sizes[sid.0].replace(n).is_some() {
            return Err(SourceError::new(sl, sc, format!("duplicate domain for sort `{}`", sname)));
        }
        ts.expect(Tok::Semi)?;
    }
    for (i, s) in sizes.iter().enumerate() {
        if s.is_none() {
            return Err(ts.err_here(format!(
                "missing domain declaration for sort `{}`",
                signature.sort_name(crate::logic::SortId(i))
            )));
        }
    }
    let sizes_vec: Vec<usize> = sizes.into_iter().map(|s| s.unwrap()).collect();
    let sizes = DomainSizes::new(signature, &sizes_vec)
        .map_err(|e| ts.err_here(e.to_string()))?;
    let mut structure = Structure::empty(signature.clone(), sizes);
    while ts.at_keyword("fact") {
        ts.next();
        let (rname, rl, rc) = ts.expect_ident()?;
        let rid = signature
            .rel_id(&rname)
            .ok_or_else(|| SourceError::new(rl, rc, format!("unknown relation `{}`", rname)))?;
        ts.expect(Tok::LParen)?;
        let mut tuple = Vec::new();
        if !ts.eat(&Tok::RParen) {
            loop {
                let (num, nl, nc) = ts.expect_number()?;
                let v = num
                    .parse::<u32>()
                    .map_err(|_| SourceError::new(nl, nc, "elements are non-negative integers"))?;
                tuple.push(v);
                if ts.eat(&Tok::RParen) {
                    break;
                }
                ts.expect(Tok::Comma)?;
            }
        }
        structure
            .insert(rid, tuple)
            .map_err(|e| SourceError::new(rl, rc, e.to_string()))?;
        ts.expect(Tok::Semi)?;
    }
    ts.expect_eof()?;
    Ok(structure)
}
