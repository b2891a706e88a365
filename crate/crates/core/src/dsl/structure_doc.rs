//! Structure documents: the text form of finite metric structures.
//!
//! Grammar (entries end with `;`, `#` starts a comment):
//!
//! ```text
//! format 1
//! signature {
//!   fn mult/2;
//!   state tau/1;
//!   metric_in_states false;
//!   domains all;
//! }
//! carrier { e; g; }
//! table mult { (e,e) -> e; (e,g) -> g; (g,e) -> g; (g,g) -> e; }
//! state tau { (e) -> 1; (g) -> 0; }
//! metric { (e,g) -> 1; }
//! domain all { e, g }
//! genset gens { g }
//! modulus mult (all, all) { 1/2 -> 1/2; 1 -> 1; }
//! ```
//!
//! Tables and states must be total; the metric lists each unordered pair
//! once (the diagonal is implicitly zero). Every carrier element must
//! belong to at least one domain. Serialization is canonical: fixed block
//! order and spacing, entries in declaration/index order, so outputs are
//! byte-identical across runs.

use std::collections::BTreeMap;

use crate::rat::{fmt_rat, Rat};
use crate::sig::{ContinuityModulus, FunctionSymbol, Signature, StateSymbol};
use crate::structure::{FiniteStructure, OpTable, StructureError};

use super::lex::{lex, ParseError, Span, Tok, TokKind};

/// A parsed structure document: the structure itself plus any named
/// generating sets.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureDoc {
    pub structure: FiniteStructure,
    pub gensets: Vec<(String, Vec<usize>)>,
}

impl StructureDoc {
    pub fn genset(&self, name: &str) -> Option<&[usize]> {
        self.gensets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, els)| els.as_slice())
    }
}

pub fn parse_structure(text: &str) -> Result<StructureDoc, ParseError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.document()
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

type RawEntry<V> = (Vec<String>, V, Span);
type RawBlock<V> = (String, Span, Vec<RawEntry<V>>);
type RawMetricEntry = (String, String, Rat, Span);
type NameListBlock = (String, Span, Vec<(String, Span)>);

#[derive(Default)]
struct RawDoc {
    functions: Vec<(String, usize, Span)>,
    states: Vec<(String, usize, Span)>,
    metric_in_states: Option<bool>,
    domain_labels: Vec<(String, Span)>,
    carrier: Vec<(String, Span)>,
    tables: Vec<RawBlock<String>>,
    state_tables: Vec<RawBlock<Rat>>,
    metric: Option<(Span, Vec<RawMetricEntry>)>,
    domains: Vec<NameListBlock>,
    gensets: Vec<NameListBlock>,
    moduli: Vec<ContinuityModulus>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: &TokKind) -> Result<Tok, ParseError> {
        let t = self.next();
        if &t.kind == kind {
            Ok(t)
        } else {
            Err(ParseError::at(
                t.span,
                format!("expected {kind}, found {}", t.kind),
            ))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), ParseError> {
        let t = self.next();
        match t.kind {
            TokKind::Ident(s) => Ok((s, t.span)),
            other => Err(ParseError::at(
                t.span,
                format!("expected a name, found {other}"),
            )),
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Result<Span, ParseError> {
        let (name, span) = self.expect_ident()?;
        if name == word {
            Ok(span)
        } else {
            Err(ParseError::at(
                span,
                format!("expected `{word}`, found `{name}`"),
            ))
        }
    }

    fn expect_int(&mut self) -> Result<(i64, Span), ParseError> {
        let t = self.next();
        match t.kind {
            TokKind::Int(v) => Ok((v, t.span)),
            other => Err(ParseError::at(
                t.span,
                format!("expected an integer, found {other}"),
            )),
        }
    }

    fn rational(&mut self) -> Result<(Rat, Span), ParseError> {
        let (numer, span) = self.expect_int()?;
        if self.peek().kind == TokKind::Slash {
            self.next();
            let (denom, dspan) = self.expect_int()?;
            if denom == 0 {
                return Err(ParseError::at(dspan, "denominator must be nonzero"));
            }
            Ok((Rat::new(numer, denom), span))
        } else {
            Ok((Rat::new(numer, 1), span))
        }
    }

    fn document(&mut self) -> Result<StructureDoc, ParseError> {
        let span = self.expect_keyword("format")?;
        let (version, vspan) = self.expect_int()?;
        if version != 1 {
            return Err(ParseError::at(
                vspan,
                format!("unsupported format {version}, expected 1"),
            ));
        }
        let mut raw = RawDoc::default();
        loop {
            let t = self.peek().clone();
            match &t.kind {
                TokKind::Eof => break,
                TokKind::Ident(word) => match word.as_str() {
                    "signature" => self.signature_block(&mut raw)?,
                    "carrier" => self.carrier_block(&mut raw)?,
                    "table" => self.table_block(&mut raw)?,
                    "state" => self.state_block(&mut raw)?,
                    "metric" => self.metric_block(&mut raw)?,
                    "domain" => self.domain_block(&mut raw)?,
                    "genset" => self.genset_block(&mut raw)?,
                    "modulus" => self.modulus_block(&mut raw)?,
                    other => {
                        return Err(ParseError::at(t.span, format!("unknown block `{other}`")))
                    }
                },
                other => {
                    return Err(ParseError::at(
                        t.span,
                        format!("expected a block, found {other}"),
                    ))
                }
            }
        }
        resolve(raw, span)
    }

    fn signature_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        self.expect_keyword("signature")?;
        self.expect(&TokKind::LBrace)?;
        loop {
            let t = self.peek().clone();
            match &t.kind {
                TokKind::RBrace => {
                    self.next();
                    return Ok(());
                }
                TokKind::Ident(word) => match word.as_str() {
                    "fn" => {
                        self.next();
                        let (name, span) = self.expect_ident()?;
                        self.expect(&TokKind::Slash)?;
                        let (arity, aspan) = self.expect_int()?;
                        if arity < 0 {
                            return Err(ParseError::at(aspan, "arity must be nonnegative"));
                        }
                        self.expect(&TokKind::Semi)?;
                        raw.functions.push((name, arity as usize, span));
                    }
                    "state" => {
                        self.next();
                        let (name, span) = self.expect_ident()?;
                        self.expect(&TokKind::Slash)?;
                        let (arity, aspan) = self.expect_int()?;
                        if arity < 1 {
                            return Err(ParseError::at(aspan, "state arity must be at least 1"));
                        }
                        self.expect(&TokKind::Semi)?;
                        raw.states.push((name, arity as usize, span));
                    }
                    "metric_in_states" => {
                        self.next();
                        let (value, vspan) = self.expect_ident()?;
                        let flag = match value.as_str() {
                            "true" => true,
                            "false" => false,
                            other => {
                                return Err(ParseError::at(
                                    vspan,
                                    format!("expected `true` or `false`, found `{other}`"),
                                ))
                            }
                        };
                        self.expect(&TokKind::Semi)?;
                        raw.metric_in_states = Some(flag);
                    }
                    "domains" => {
                        self.next();
                        loop {
                            let (name, span) = self.expect_ident()?;
                            raw.domain_labels.push((name, span));
                            if self.peek().kind == TokKind::Comma {
                                self.next();
                            } else {
                                break;
                            }
                        }
                        self.expect(&TokKind::Semi)?;
                    }
                    other => {
                        return Err(ParseError::at(
                            t.span,
                            format!("unknown signature item `{other}`"),
                        ))
                    }
                },
                other => {
                    return Err(ParseError::at(
                        t.span,
                        format!("expected a signature item, found {other}"),
                    ))
                }
            }
        }
    }

    fn carrier_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        self.expect_keyword("carrier")?;
        self.expect(&TokKind::LBrace)?;
        while self.peek().kind != TokKind::RBrace {
            let (name, span) = self.expect_ident()?;
            self.expect(&TokKind::Semi)?;
            raw.carrier.push((name, span));
        }
        self.expect(&TokKind::RBrace)?;
        Ok(())
    }

    fn args_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect(&TokKind::LParen)?;
        let mut args = Vec::new();
        if self.peek().kind != TokKind::RParen {
            loop {
                let (name, _) = self.expect_ident()?;
                args.push(name);
                if self.peek().kind == TokKind::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(&TokKind::RParen)?;
        Ok(args)
    }

    fn table_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        self.expect_keyword("table")?;
        let (name, span) = self.expect_ident()?;
        self.expect(&TokKind::LBrace)?;
        let mut entries = Vec::new();
        while self.peek().kind != TokKind::RBrace {
            let espan = self.peek().span;
            let args = self.args_list()?;
            self.expect(&TokKind::Arrow)?;
            let (value, _) = self.expect_ident()?;
            self.expect(&TokKind::Semi)?;
            entries.push((args, value, espan));
        }
        self.expect(&TokKind::RBrace)?;
        raw.tables.push((name, span, entries));
        Ok(())
    }

    fn state_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        self.expect_keyword("state")?;
        let (name, span) = self.expect_ident()?;
        self.expect(&TokKind::LBrace)?;
        let mut entries = Vec::new();
        while self.peek().kind != TokKind::RBrace {
            let espan = self.peek().span;
            let args = self.args_list()?;
            self.expect(&TokKind::Arrow)?;
            let (value, _) = self.rational()?;
            self.expect(&TokKind::Semi)?;
            entries.push((args, value, espan));
        }
        self.expect(&TokKind::RBrace)?;
        raw.state_tables.push((name, span, entries));
        Ok(())
    }

    fn metric_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        let span = self.expect_keyword("metric")?;
        self.expect(&TokKind::LBrace)?;
        let mut entries = Vec::new();
        while self.peek().kind != TokKind::RBrace {
            let espan = self.peek().span;
            self.expect(&TokKind::LParen)?;
            let (a, _) = self.expect_ident()?;
            self.expect(&TokKind::Comma)?;
            let (b, _) = self.expect_ident()?;
            self.expect(&TokKind::RParen)?;
            self.expect(&TokKind::Arrow)?;
            let (value, _) = self.rational()?;
            self.expect(&TokKind::Semi)?;
            entries.push((a, b, value, espan));
        }
        self.expect(&TokKind::RBrace)?;
        if raw.metric.is_some() {
            return Err(ParseError::at(span, "duplicate metric block"));
        }
        raw.metric = Some((span, entries));
        Ok(())
    }

    fn name_list_block(&mut self) -> Result<NameListBlock, ParseError> {
        let (name, span) = self.expect_ident()?;
        self.expect(&TokKind::LBrace)?;
        let mut items = Vec::new();
        while self.peek().kind != TokKind::RBrace {
            let (item, ispan) = self.expect_ident()?;
            items.push((item, ispan));
            if self.peek().kind == TokKind::Comma {
                self.next();
            }
        }
        self.expect(&TokKind::RBrace)?;
        Ok((name, span, items))
    }

    fn domain_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        self.expect_keyword("domain")?;
        let block = self.name_list_block()?;
        raw.domains.push(block);
        Ok(())
    }

    fn genset_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        self.expect_keyword("genset")?;
        let block = self.name_list_block()?;
        raw.gensets.push(block);
        Ok(())
    }

    fn modulus_block(&mut self, raw: &mut RawDoc) -> Result<(), ParseError> {
        self.expect_keyword("modulus")?;
        let (symbol, _) = self.expect_ident()?;
        self.expect(&TokKind::LParen)?;
        let mut domains = Vec::new();
        if self.peek().kind != TokKind::RParen {
            loop {
                let (d, _) = self.expect_ident()?;
                domains.push(d);
                if self.peek().kind == TokKind::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(&TokKind::RParen)?;
        self.expect(&TokKind::LBrace)?;
        let mut breakpoints = Vec::new();
        while self.peek().kind != TokKind::RBrace {
            let (x, _) = self.rational()?;
            self.expect(&TokKind::Arrow)?;
            let (y, _) = self.rational()?;
            self.expect(&TokKind::Semi)?;
            breakpoints.push((x, y));
        }
        self.expect(&TokKind::RBrace)?;
        raw.moduli.push(ContinuityModulus {
            symbol,
            domains,
            breakpoints,
        });
        Ok(())
    }
}

fn resolve(raw: RawDoc, doc_span: Span) -> Result<StructureDoc, ParseError> {
    if raw.functions.is_empty() && raw.states.is_empty() {
        return Err(ParseError::at(doc_span, "missing or empty signature block"));
    }
    let functions: Vec<FunctionSymbol> = raw
        .functions
        .iter()
        .map(|(n, a, _)| FunctionSymbol {
            name: n.clone(),
            arity: *a,
        })
        .collect();
    let states: Vec<StateSymbol> = raw
        .states
        .iter()
        .map(|(n, a, _)| StateSymbol {
            name: n.clone(),
            arity: *a,
        })
        .collect();
    let domain_labels: Vec<String> = raw.domain_labels.iter().map(|(n, _)| n.clone()).collect();
    let mut signature = Signature::new(
        functions,
        states,
        domain_labels,
        raw.metric_in_states.unwrap_or(false),
    )
    .map_err(|e| ParseError::at(doc_span, e.to_string()))?;
    for m in &raw.moduli {
        if signature.function(&m.symbol).is_none() && signature.state(&m.symbol).is_none() {
            return Err(ParseError::at(
                doc_span,
                format!("modulus refers to undeclared symbol `{}`", m.symbol),
            ));
        }
        m.validate()
            .map_err(|e| ParseError::at(doc_span, e.to_string()))?;
    }
    signature.moduli = raw.moduli.clone();

    if raw.carrier.is_empty() {
        return Err(ParseError::at(doc_span, "missing or empty carrier block"));
    }
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut elements = Vec::new();
    for (name, span) in &raw.carrier {
        if index.insert(name.clone(), elements.len()).is_some() {
            return Err(ParseError::at(
                *span,
                format!("duplicate carrier element `{name}`"),
            ));
        }
        elements.push(name.clone());
    }
    let m = elements.len();
    let elem = |name: &str, span: Span| -> Result<usize, ParseError> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| ParseError::at(span, format!("undeclared carrier element `{name}`")))
    };

    // operation tables
    let mut op_tables: Vec<Option<OpTable>> = vec![None; signature.functions.len()];
    for (name, span, entries) in &raw.tables {
        let Some(fid) = signature.function(name) else {
            return Err(ParseError::at(
                *span,
                format!("undeclared function symbol `{name}`"),
            ));
        };
        let arity = signature.fn_arity(fid);
        let size = m.pow(arity as u32);
        let mut data: Vec<Option<u32>> = vec![None; size];
        for (args, value, espan) in entries {
            if args.len() != arity {
                return Err(ParseError::at(
                    *espan,
                    format!("`{name}` takes {arity} arguments, entry has {}", args.len()),
                ));
            }
            let mut idx = 0usize;
            for a in args {
                idx = idx * m + elem(a, *espan)?;
            }
            let v = elem(value, *espan)?;
            if data[idx].is_some() {
                return Err(ParseError::at(
                    *espan,
                    format!("duplicate entry for ({}) in table `{name}`", args.join(",")),
                ));
            }
            data[idx] = Some(v as u32);
        }
        if let Some(missing) = data.iter().position(|v| v.is_none()) {
            let tuple = tuple_names(missing, m, arity, &elements);
            return Err(ParseError::at(
                *span,
                format!("non-total table `{name}`: missing entry for ({tuple})"),
            ));
        }
        op_tables[fid.0] = Some(OpTable {
            arity,
            data: data.into_iter().map(|v| v.unwrap()).collect(),
        });
    }
    for (i, t) in op_tables.iter().enumerate() {
        if t.is_none() {
            return Err(ParseError::at(
                doc_span,
                format!(
                    "no table given for function symbol `{}`",
                    signature.functions[i].name
                ),
            ));
        }
    }
    let op_tables: Vec<OpTable> = op_tables.into_iter().map(|t| t.unwrap()).collect();

    // state tables
    let mut state_tables: Vec<Option<Vec<Rat>>> = vec![None; signature.states.len()];
    for (name, span, entries) in &raw.state_tables {
        let Some(sid) = signature.state(name) else {
            return Err(ParseError::at(
                *span,
                format!("undeclared state symbol `{name}`"),
            ));
        };
        let arity = signature.state_arity(sid);
        let size = m.pow(arity as u32);
        let mut data: Vec<Option<Rat>> = vec![None; size];
        for (args, value, espan) in entries {
            if args.len() != arity {
                return Err(ParseError::at(
                    *espan,
                    format!("`{name}` takes {arity} arguments, entry has {}", args.len()),
                ));
            }
            let mut idx = 0usize;
            for a in args {
                idx = idx * m + elem(a, *espan)?;
            }
            if data[idx].is_some() {
                return Err(ParseError::at(
                    *espan,
                    format!("duplicate entry for ({}) in state `{name}`", args.join(",")),
                ));
            }
            data[idx] = Some(*value);
        }
        if let Some(missing) = data.iter().position(|v| v.is_none()) {
            let tuple = tuple_names(missing, m, arity, &elements);
            return Err(ParseError::at(
                *span,
                format!("non-total state `{name}`: missing entry for ({tuple})"),
            ));
        }
        state_tables[sid.0] = Some(data.into_iter().map(|v| v.unwrap()).collect());
    }
    for (i, t) in state_tables.iter().enumerate() {
        if t.is_none() {
            return Err(ParseError::at(
                doc_span,
                format!(
                    "no table given for state symbol `{}`",
                    signature.states[i].name
                ),
            ));
        }
    }
    let state_tables: Vec<Vec<Rat>> = state_tables.into_iter().map(|t| t.unwrap()).collect();

    // metric: unordered pairs once, diagonal implicit
    let Some((mspan, mentries)) = &raw.metric else {
        return Err(ParseError::at(doc_span, "missing metric block"));
    };
    let zero = Rat::new(0, 1);
    let mut metric: Vec<Option<Rat>> = vec![None; m * m];
    for a in 0..m {
        metric[a * m + a] = Some(zero);
    }
    for (a, b, value, espan) in mentries {
        let ia = elem(a, *espan)?;
        let ib = elem(b, *espan)?;
        if ia == ib {
            if *value != zero {
                return Err(ParseError::at(
                    *espan,
                    format!("metric diagonal ({a},{a}) must be 0"),
                ));
            }
            continue;
        }
        if *value < zero {
            return Err(ParseError::at(
                *espan,
                format!("metric entry ({a},{b}) is negative"),
            ));
        }
        if metric[ia * m + ib].is_some() {
            return Err(ParseError::at(
                *espan,
                format!("duplicate metric entry ({a},{b})"),
            ));
        }
        metric[ia * m + ib] = Some(*value);
        metric[ib * m + ia] = Some(*value);
    }
    for a in 0..m {
        for b in (a + 1)..m {
            if metric[a * m + b].is_none() {
                return Err(ParseError::at(
                    *mspan,
                    format!(
                        "metric is missing the pair ({},{})",
                        elements[a], elements[b]
                    ),
                ));
            }
        }
    }
    let metric: Vec<Rat> = metric.into_iter().map(|v| v.unwrap()).collect();

    // domains
    let mut domains: Vec<Option<Vec<bool>>> = vec![None; signature.domain_labels.len()];
    for (name, span, items) in &raw.domains {
        let Some(di) = signature.domain_labels.iter().position(|l| l == name) else {
            return Err(ParseError::at(
                *span,
                format!("undeclared domain label `{name}`"),
            ));
        };
        if domains[di].is_some() {
            return Err(ParseError::at(
                *span,
                format!("duplicate domain block `{name}`"),
            ));
        }
        let mut membership = vec![false; m];
        for (item, ispan) in items {
            membership[elem(item, *ispan)?] = true;
        }
        domains[di] = Some(membership);
    }
    let domains: Vec<Vec<bool>> = domains
        .into_iter()
        .map(|d| d.unwrap_or_else(|| vec![false; m]))
        .collect();

    let structure = FiniteStructure {
        signature,
        elements: elements.clone(),
        op_tables,
        state_tables,
        metric,
        domains,
    };
    structure.validate().map_err(|e| {
        ParseError::at(
            match e {
                StructureError::Triangle { .. }
                | StructureError::NotSymmetric { .. }
                | StructureError::Negative { .. }
                | StructureError::NonzeroDiagonal(_) => {
                    raw.metric.as_ref().map(|(s, _)| *s).unwrap_or(doc_span)
                }
                _ => doc_span,
            },
            e.to_string(),
        )
    })?;

    let mut gensets = Vec::new();
    for (name, span, items) in &raw.gensets {
        if gensets
            .iter()
            .any(|(n, _): &(String, Vec<usize>)| n == name)
        {
            return Err(ParseError::at(*span, format!("duplicate genset `{name}`")));
        }
        let mut els = Vec::new();
        for (item, ispan) in items {
            els.push(elem(item, *ispan)?);
        }
        gensets.push((name.clone(), els));
    }

    Ok(StructureDoc { structure, gensets })
}

fn tuple_names(mut idx: usize, m: usize, arity: usize, elements: &[String]) -> String {
    let mut parts = vec![String::new(); arity];
    for slot in (0..arity).rev() {
        parts[slot] = elements[idx % m].clone();
        idx /= m;
    }
    parts.join(",")
}

/// Canonical text: fixed block order and spacing, symbols in declaration
/// order, entries in carrier-index order. Byte-identical across runs.
pub fn serialize_structure(doc: &StructureDoc) -> String {
    let s = &doc.structure;
    let sig = &s.signature;
    let m = s.size();
    let mut out = String::from("format 1\n");
    out.push_str("signature {\n");
    for f in &sig.functions {
        out.push_str(&format!("  fn {}/{};\n", f.name, f.arity));
    }
    for st in &sig.states {
        out.push_str(&format!("  state {}/{};\n", st.name, st.arity));
    }
    out.push_str(&format!("  metric_in_states {};\n", sig.metric_in_states));
    out.push_str(&format!("  domains {};\n", sig.domain_labels.join(", ")));
    out.push_str("}\n");
    out.push_str("carrier {\n");
    for e in &s.elements {
        out.push_str(&format!("  {e};\n"));
    }
    out.push_str("}\n");
    for (i, f) in sig.functions.iter().enumerate() {
        out.push_str(&format!("table {} {{\n", f.name));
        let table = &s.op_tables[i];
        for idx in 0..table.data.len() {
            let tuple = tuple_names(idx, m, f.arity, &s.elements);
            out.push_str(&format!(
                "  ({tuple}) -> {};\n",
                s.elements[table.data[idx] as usize]
            ));
        }
        out.push_str("}\n");
    }
    for (i, st) in sig.states.iter().enumerate() {
        out.push_str(&format!("state {} {{\n", st.name));
        for idx in 0..s.state_tables[i].len() {
            let tuple = tuple_names(idx, m, st.arity, &s.elements);
            out.push_str(&format!(
                "  ({tuple}) -> {};\n",
                fmt_rat(s.state_tables[i][idx])
            ));
        }
        out.push_str("}\n");
    }
    out.push_str("metric {\n");
    for a in 0..m {
        for b in (a + 1)..m {
            out.push_str(&format!(
                "  ({},{}) -> {};\n",
                s.elements[a],
                s.elements[b],
                fmt_rat(s.distance(a, b))
            ));
        }
    }
    out.push_str("}\n");
    for (di, label) in sig.domain_labels.iter().enumerate() {
        let members: Vec<String> = (0..m)
            .filter(|&a| s.domains[di][a])
            .map(|a| s.elements[a].clone())
            .collect();
        out.push_str(&format!("domain {} {{ {} }}\n", label, members.join(", ")));
    }
    for (name, els) in &doc.gensets {
        let members: Vec<String> = els.iter().map(|&a| s.elements[a].clone()).collect();
        out.push_str(&format!("genset {} {{ {} }}\n", name, members.join(", ")));
    }
    for modulus in &sig.moduli {
        out.push_str(&format!(
            "modulus {} ({}) {{",
            modulus.symbol,
            modulus.domains.join(", ")
        ));
        for (x, y) in &modulus.breakpoints {
            out.push_str(&format!(" {} -> {};", fmt_rat(*x), fmt_rat(*y)));
        }
        out.push_str(" }\n");
    }
    out
}
