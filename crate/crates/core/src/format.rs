//! Line-oriented text formats.
//!
//! Instance documents start with `hadm-1` and hold `[colleges]`,
//! `[students]` and optionally `[smti]` sections. Each record is one line:
//! an id followed by `key=value` fields. Lists are comma separated and
//! contract entries are written `college:terms` with terms `1` (state) or
//! `0` (self). Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! hadm-1
//! [colleges]
//! c q_state=1 q_self=1 policy=inverse-merit ranking=p,r
//! [students]
//! p rol=c:1
//! r rol=c:1,c:0
//! ```
//!
//! Allocation documents start with `hadm-alloc-1`, carry the market
//! fingerprint, algorithm and seed, then `[assigned]` rows `s,c,t` and an
//! `[unassigned]` list, both sorted by student id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::market::{
    CollegeAttributes, Contract, FundingPolicy, Market, RawCollege, RawMarket, RawStudent, StudentAttributes, Terms,
    ValidationErrors,
};
use crate::smti::{Man, SmtiInstance, StrictWoman, TiedWoman};
use crate::stability::{BlockWitness, Condition, StabilityVerdict};

pub const INSTANCE_HEADER: &str = "hadm-1";
pub const ALLOCATION_HEADER: &str = "hadm-alloc-1";
pub const MANIFEST_HEADER: &str = "hadm-manifest-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormatCode {
    MissingHeader,
    UnknownSection,
    RecordOutsideSection,
    MalformedField,
    UnknownKey,
    DuplicateKey,
    MissingKey,
    InvalidTerms,
    InvalidNumber,
    InvalidBool,
    InvalidPolicy,
    InvalidToken,
    Validation,
    FingerprintMismatch,
    UnknownStudent,
    UnknownCollege,
    DuplicateStudent,
    Smti,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {code:?}: {message}")]
pub struct FormatError {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub column: usize,
    pub code: FormatCode,
    pub message: String,
}

impl FormatError {
    fn at(line: usize, column: usize, code: FormatCode, message: impl Into<String>) -> Self {
        FormatError {
            line,
            column,
            code,
            message: message.into(),
        }
    }
}

/// Characters that cannot appear inside ids or attribute values.
fn is_reserved(ch: char) -> bool {
    ch.is_whitespace() || matches!(ch, ',' | ':' | '=' | '#' | '[' | ']')
}

pub fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(is_reserved)
}

/// Hex digest identifying a market's content.
pub fn fingerprint(market: &Market) -> String {
    let raw = market.to_raw();
    let bytes = serde_json::to_vec(&raw).expect("markets serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceDocument {
    pub market: Market,
    pub smti: Option<SmtiInstance>,
}

/// A non-comment line split into whitespace-separated words with their
/// 1-based columns.
struct Line<'a> {
    number: usize,
    words: Vec<(usize, &'a str)>,
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        let mut words = Vec::new();
        let mut start = None;
        for (j, ch) in raw.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(j),
                (true, Some(s)) => {
                    words.push((s + 1, &raw[s..j]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            words.push((s + 1, &raw[s..]));
        }
        Some(Line { number: i + 1, words })
    })
}

/// `key=value` fields of one record.
struct Fields<'a> {
    line: usize,
    map: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Fields<'a> {
    fn parse(line: &Line<'a>, from: usize) -> Result<Self, FormatError> {
        let mut map = BTreeMap::new();
        for &(col, w) in &line.words[from..] {
            let Some((k, v)) = w.split_once('=') else {
                return Err(FormatError::at(line.number, col, FormatCode::MalformedField, format!("expected key=value, found {w:?}")));
            };
            if map.insert(k, (col + k.len() + 1, v)).is_some() {
                return Err(FormatError::at(line.number, col, FormatCode::DuplicateKey, format!("key {k} given twice")));
            }
        }
        Ok(Fields { line: line.number, map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, &'a str)> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(usize, &'a str), FormatError> {
        self.take(key)
            .ok_or_else(|| FormatError::at(self.line, 1, FormatCode::MissingKey, format!("missing {key}=")))
    }

    fn finish(self) -> Result<(), FormatError> {
        match self.map.into_iter().next() {
            Some((k, (col, _))) => Err(FormatError::at(self.line, col - k.len() - 1, FormatCode::UnknownKey, format!("unknown key {k}"))),
            None => Ok(()),
        }
    }

    /// Remaining `prefix.*` keys, removed from the record.
    fn take_prefixed(&mut self, prefix: &str) -> Vec<(&'a str, usize, &'a str)> {
        let keys: Vec<&'a str> = self.map.keys().copied().filter(|k| k.starts_with(prefix)).collect();
        keys.into_iter()
            .map(|k| {
                let (c, v) = self.map.remove(k).expect("key just listed");
                (&k[prefix.len()..], c, v)
            })
            .collect()
    }
}

fn list(v: &str) -> Vec<&str> {
    if v.is_empty() {
        Vec::new()
    } else {
        v.split(',').collect()
    }
}

fn token(line: usize, col: usize, s: &str) -> Result<String, FormatError> {
    if is_token(s) {
        Ok(s.to_string())
    } else {
        Err(FormatError::at(line, col, FormatCode::InvalidToken, format!("invalid token {s:?}")))
    }
}

fn parse_terms(line: usize, col: usize, s: &str) -> Result<Terms, FormatError> {
    match s {
        "1" => Ok(Terms::StateFunded),
        "0" => Ok(Terms::SelfFunded),
        _ => Err(FormatError::at(line, col, FormatCode::InvalidTerms, format!("terms must be 0 or 1, found {s:?}"))),
    }
}

fn parse_bool(line: usize, col: usize, s: &str) -> Result<bool, FormatError> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(FormatError::at(line, col, FormatCode::InvalidBool, format!("expected true or false, found {s:?}"))),
    }
}

fn parse_int(line: usize, col: usize, s: &str) -> Result<i64, FormatError> {
    s.parse()
        .map_err(|_| FormatError::at(line, col, FormatCode::InvalidNumber, format!("expected an integer, found {s:?}")))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Colleges,
    Students,
    Smti,
}

pub fn parse_instance(text: &str) -> Result<InstanceDocument, FormatError> {
    let mut it = lines(text);
    match it.next() {
        Some(l) if l.words.len() == 1 && l.words[0].1 == INSTANCE_HEADER => {}
        Some(l) => return Err(FormatError::at(l.number, 1, FormatCode::MissingHeader, format!("expected {INSTANCE_HEADER}"))),
        None => return Err(FormatError::at(0, 0, FormatCode::MissingHeader, format!("expected {INSTANCE_HEADER}"))),
    }
    let mut section = Section::None;
    let mut raw = RawMarket::default();
    let mut smti: Option<SmtiInstance> = None;
    for l in it {
        let (col, first) = l.words[0];
        if first.starts_with('[') {
            section = match first {
                "[colleges]" => Section::Colleges,
                "[students]" => Section::Students,
                "[smti]" => {
                    smti.get_or_insert_with(SmtiInstance::default);
                    Section::Smti
                }
                _ => return Err(FormatError::at(l.number, col, FormatCode::UnknownSection, format!("unknown section {first}"))),
            };
            if l.words.len() > 1 {
                return Err(FormatError::at(l.number, l.words[1].0, FormatCode::MalformedField, "text after section header"));
            }
            continue;
        }
        match section {
            Section::None => {
                return Err(FormatError::at(l.number, col, FormatCode::RecordOutsideSection, "record before any section"))
            }
            Section::Colleges => raw.colleges.push(parse_college(&l)?),
            Section::Students => raw.students.push(parse_student(&l)?),
            Section::Smti => parse_smti_line(&l, smti.as_mut().expect("section opened"))?,
        }
    }
    let market = Market::validate(raw).map_err(validation_error)?;
    if let Some(s) = smti.as_mut() {
        s.men.sort_by(|a, b| a.id.cmp(&b.id));
        s.women_strict.sort_by(|a, b| a.id.cmp(&b.id));
        s.women_tied.sort_by(|a, b| a.id.cmp(&b.id));
        s.validate().map_err(|e| FormatError::at(0, 0, FormatCode::Smti, e.to_string()))?;
    }
    Ok(InstanceDocument { market, smti })
}

pub fn parse_market(text: &str) -> Result<Market, FormatError> {
    parse_instance(text).map(|d| d.market)
}

fn validation_error(e: ValidationErrors) -> FormatError {
    FormatError::at(0, 0, FormatCode::Validation, e.to_string())
}

fn parse_college(l: &Line<'_>) -> Result<RawCollege, FormatError> {
    let (col, id) = l.words[0];
    let id = token(l.number, col, id)?;
    let mut f = Fields::parse(l, 1)?;
    let (c, v) = f.require("q_state")?;
    let quota_state = parse_int(l.number, c, v)?;
    let (c, v) = f.require("q_self")?;
    let quota_self = parse_int(l.number, c, v)?;
    let (c, v) = f.require("policy")?;
    let funding_policy = FundingPolicy::from_token(v)
        .ok_or_else(|| FormatError::at(l.number, c, FormatCode::InvalidPolicy, format!("unknown policy {v:?}")))?;
    let (c, v) = f.require("ranking")?;
    let ranking = list(v).into_iter().map(|s| token(l.number, c, s)).collect::<Result<_, _>>()?;
    let mut attrs = CollegeAttributes::default();
    let mut any = false;
    if let Some((c, v)) = f.take("county") {
        attrs.location_county = Some(token(l.number, c, v)?);
        any = true;
    }
    if let Some((c, v)) = f.take("capital") {
        attrs.in_capital = Some(parse_bool(l.number, c, v)?);
        any = true;
    }
    if let Some((c, v)) = f.take("full_time") {
        attrs.full_time = Some(parse_bool(l.number, c, v)?);
        any = true;
    }
    f.finish()?;
    Ok(RawCollege {
        id,
        quota_state,
        quota_self,
        ranking,
        funding_policy,
        attributes: any.then_some(attrs),
    })
}

fn parse_student(l: &Line<'_>) -> Result<RawStudent, FormatError> {
    let (col, id) = l.words[0];
    let id = token(l.number, col, id)?;
    let mut f = Fields::parse(l, 1)?;
    let (c, v) = f.require("rol")?;
    let mut rol = Vec::new();
    for entry in list(v) {
        let Some((college, terms)) = entry.split_once(':') else {
            return Err(FormatError::at(l.number, c, FormatCode::MalformedField, format!("expected college:terms, found {entry:?}")));
        };
        rol.push((token(l.number, c, college)?, parse_terms(l.number, c, terms)?));
    }
    let mut attrs = StudentAttributes::default();
    let mut any = false;
    if let Some((c, v)) = f.take("county") {
        attrs.residence_county = Some(token(l.number, c, v)?);
        any = true;
    }
    if let Some((c, v)) = f.take("capital") {
        attrs.lives_in_capital = Some(parse_bool(l.number, c, v)?);
        any = true;
    }
    for (k, c, v) in f.take_prefixed("tag.") {
        attrs.tags.insert(token(l.number, c, k)?, token(l.number, c, v)?);
        any = true;
    }
    f.finish()?;
    Ok(RawStudent {
        id,
        rol,
        attributes: any.then_some(attrs),
    })
}

fn parse_smti_line(l: &Line<'_>, smti: &mut SmtiInstance) -> Result<(), FormatError> {
    let (col, kind) = l.words[0];
    let Some(&(idcol, id)) = l.words.get(1) else {
        return Err(FormatError::at(l.number, col, FormatCode::MalformedField, "expected kind and id"));
    };
    let id = token(l.number, idcol, id)?;
    let mut f = Fields::parse(l, 2)?;
    let ids = |f: &mut Fields<'_>, key: &str| -> Result<Vec<String>, FormatError> {
        let (c, v) = f.require(key)?;
        list(v).into_iter().map(|s| token(l.number, c, s)).collect()
    };
    match kind {
        "man" => {
            let prefs = ids(&mut f, "prefs")?;
            smti.men.push(Man { id, prefs });
        }
        "strict" => {
            let prefs = ids(&mut f, "prefs")?;
            smti.women_strict.push(StrictWoman { id, prefs });
        }
        "tied" => {
            let men = ids(&mut f, "men")?;
            smti.women_tied.push(TiedWoman { id, men });
        }
        _ => {
            return Err(FormatError::at(l.number, col, FormatCode::MalformedField, format!("unknown smti record {kind:?}")))
        }
    }
    f.finish()
}

/// Canonical text; ids that are not tokens are reported rather than
/// written.
pub fn serialize_instance(doc: &InstanceDocument) -> Result<String, FormatError> {
    let raw = doc.market.to_raw();
    let bad = |s: &str| FormatError::at(0, 0, FormatCode::InvalidToken, format!("{s:?} cannot be written"));
    let tok = |s: &str| if is_token(s) { Ok(()) } else { Err(bad(s)) };
    let mut out = String::new();
    out.push_str(INSTANCE_HEADER);
    out.push('\n');
    out.push_str("[colleges]\n");
    for c in &raw.colleges {
        tok(&c.id)?;
        for s in &c.ranking {
            tok(s)?;
        }
        write!(
            out,
            "{} q_state={} q_self={} policy={} ranking={}",
            c.id,
            c.quota_state,
            c.quota_self,
            c.funding_policy.token(),
            c.ranking.join(",")
        )
        .expect("write to string");
        if let Some(a) = &c.attributes {
            if let Some(v) = &a.location_county {
                tok(v)?;
                write!(out, " county={v}").expect("write to string");
            }
            if let Some(v) = a.in_capital {
                write!(out, " capital={v}").expect("write to string");
            }
            if let Some(v) = a.full_time {
                write!(out, " full_time={v}").expect("write to string");
            }
        }
        out.push('\n');
    }
    out.push_str("[students]\n");
    for s in &raw.students {
        tok(&s.id)?;
        let rol: Vec<String> = s.rol.iter().map(|(c, t)| format!("{c}:{t}")).collect();
        write!(out, "{} rol={}", s.id, rol.join(",")).expect("write to string");
        if let Some(a) = &s.attributes {
            if let Some(v) = &a.residence_county {
                tok(v)?;
                write!(out, " county={v}").expect("write to string");
            }
            if let Some(v) = a.lives_in_capital {
                write!(out, " capital={v}").expect("write to string");
            }
            for (k, v) in &a.tags {
                tok(k)?;
                tok(v)?;
                write!(out, " tag.{k}={v}").expect("write to string");
            }
        }
        out.push('\n');
    }
    if let Some(smti) = &doc.smti {
        out.push_str("[smti]\n");
        let mut men = smti.men.clone();
        men.sort_by(|a, b| a.id.cmp(&b.id));
        let mut strict = smti.women_strict.clone();
        strict.sort_by(|a, b| a.id.cmp(&b.id));
        let mut tied = smti.women_tied.clone();
        tied.sort_by(|a, b| a.id.cmp(&b.id));
        for m in &men {
            writeln!(out, "man {} prefs={}", m.id, m.prefs.join(",")).expect("write to string");
        }
        for w in &strict {
            writeln!(out, "strict {} prefs={}", w.id, w.prefs.join(",")).expect("write to string");
        }
        for w in &tied {
            writeln!(out, "tied {} men={}", w.id, w.men.join(",")).expect("write to string");
        }
    }
    Ok(out)
}

pub fn serialize_market(market: &Market) -> Result<String, FormatError> {
    serialize_instance(&InstanceDocument {
        market: market.clone(),
        smti: None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationMeta {
    pub algorithm: String,
    pub seed: Option<u64>,
}

impl AllocationMeta {
    pub fn new(algorithm: &str, seed: Option<u64>) -> Self {
        AllocationMeta {
            algorithm: algorithm.to_string(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationDocument {
    pub fingerprint: String,
    pub meta: AllocationMeta,
    pub allocation: Allocation,
}

/// Ids in an allocation come from the market, so only feasibility is
/// checked.
pub fn serialize_allocation(market: &Market, y: &Allocation, meta: &AllocationMeta) -> Result<String, FormatError> {
    if let Some(s) = y.duplicated_students().first() {
        return Err(FormatError::at(
            0,
            0,
            FormatCode::DuplicateStudent,
            format!("student {} holds two contracts", market.student(*s).id),
        ));
    }
    if !is_token(&meta.algorithm) {
        return Err(FormatError::at(0, 0, FormatCode::InvalidToken, format!("algorithm {:?}", meta.algorithm)));
    }
    let mut out = String::new();
    writeln!(out, "{ALLOCATION_HEADER}").expect("write to string");
    writeln!(out, "fingerprint={}", fingerprint(market)).expect("write to string");
    writeln!(out, "algorithm={}", meta.algorithm).expect("write to string");
    match meta.seed {
        Some(s) => writeln!(out, "seed={s}").expect("write to string"),
        None => writeln!(out, "seed=none").expect("write to string"),
    }
    out.push_str("[assigned]\n");
    let by_student = y.by_student(market.n_students());
    for k in by_student.iter().flatten() {
        writeln!(out, "{}", market.display_contract(k)).expect("write to string");
    }
    out.push_str("[unassigned]\n");
    for (i, k) in by_student.iter().enumerate() {
        if k.is_none() {
            writeln!(out, "{}", market.students()[i].id).expect("write to string");
        }
    }
    Ok(out)
}

/// Reads an allocation document for `market`; the fingerprint must match
/// and every student must be listed exactly once.
pub fn parse_allocation(text: &str, market: &Market) -> Result<AllocationDocument, FormatError> {
    let mut it = lines(text);
    match it.next() {
        Some(l) if l.words.len() == 1 && l.words[0].1 == ALLOCATION_HEADER => {}
        Some(l) => return Err(FormatError::at(l.number, 1, FormatCode::MissingHeader, format!("expected {ALLOCATION_HEADER}"))),
        None => return Err(FormatError::at(0, 0, FormatCode::MissingHeader, format!("expected {ALLOCATION_HEADER}"))),
    }
    let mut header: BTreeMap<&str, (usize, usize, &str)> = BTreeMap::new();
    #[derive(PartialEq)]
    enum Part {
        Header,
        Assigned,
        Unassigned,
    }
    let mut part = Part::Header;
    let mut allocation = Allocation::new();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut mark = |line: usize, col: usize, s: usize| -> Result<(), FormatError> {
        if seen.insert(s) {
            Ok(())
        } else {
            Err(FormatError::at(line, col, FormatCode::DuplicateStudent, format!("student {} listed twice", market.students()[s].id)))
        }
    };
    for l in it {
        let (col, w) = l.words[0];
        if l.words.len() != 1 {
            return Err(FormatError::at(l.number, l.words[1].0, FormatCode::MalformedField, "one field per line"));
        }
        match w {
            "[assigned]" => {
                part = Part::Assigned;
                continue;
            }
            "[unassigned]" => {
                part = Part::Unassigned;
                continue;
            }
            _ if w.starts_with('[') => {
                return Err(FormatError::at(l.number, col, FormatCode::UnknownSection, format!("unknown section {w}")))
            }
            _ => {}
        }
        match part {
            Part::Header => {
                let Some((k, v)) = w.split_once('=') else {
                    return Err(FormatError::at(l.number, col, FormatCode::MalformedField, "expected key=value"));
                };
                if header.insert(k, (l.number, col + k.len() + 1, v)).is_some() {
                    return Err(FormatError::at(l.number, col, FormatCode::DuplicateKey, format!("key {k} given twice")));
                }
            }
            Part::Assigned => {
                let parts: Vec<&str> = w.split(',').collect();
                if parts.len() != 3 {
                    return Err(FormatError::at(l.number, col, FormatCode::MalformedField, "expected student,college,terms"));
                }
                let s = market.student_ix(parts[0]).ok_or_else(|| {
                    FormatError::at(l.number, col, FormatCode::UnknownStudent, format!("unknown student {}", parts[0]))
                })?;
                let ccol = col + parts[0].len() + 1;
                let c = market.college_ix(parts[1]).ok_or_else(|| {
                    FormatError::at(l.number, ccol, FormatCode::UnknownCollege, format!("unknown college {}", parts[1]))
                })?;
                let t = parse_terms(l.number, ccol + parts[1].len() + 1, parts[2])?;
                mark(l.number, col, s.0)?;
                allocation.insert(Contract::new(s, c, t));
            }
            Part::Unassigned => {
                let s = market
                    .student_ix(w)
                    .ok_or_else(|| FormatError::at(l.number, col, FormatCode::UnknownStudent, format!("unknown student {w}")))?;
                mark(l.number, col, s.0)?;
            }
        }
    }
    let get = |k: &str| header.get(k).copied().ok_or_else(|| FormatError::at(0, 0, FormatCode::MissingKey, format!("missing {k}=")));
    let (fl, fc, fp) = get("fingerprint")?;
    let (_, _, algorithm) = get("algorithm")?;
    let (sl, sc, seed) = get("seed")?;
    if let Some((k, (line, col, _))) = header.iter().find(|(k, _)| !matches!(**k, "fingerprint" | "algorithm" | "seed")) {
        return Err(FormatError::at(*line, col - k.len() - 1, FormatCode::UnknownKey, format!("unknown key {k}")));
    }
    let expected = fingerprint(market);
    if fp != expected {
        return Err(FormatError::at(fl, fc, FormatCode::FingerprintMismatch, format!("document is for market {fp}, loaded market is {expected}")));
    }
    let seed = match seed {
        "none" => None,
        s => Some(
            s.parse()
                .map_err(|_| FormatError::at(sl, sc, FormatCode::InvalidNumber, format!("invalid seed {s:?}")))?,
        ),
    };
    if seen.len() != market.n_students() {
        let missing = (0..market.n_students()).find(|i| !seen.contains(i)).expect("some student missing");
        return Err(FormatError::at(0, 0, FormatCode::UnknownStudent, format!("student {} not listed", market.students()[missing].id)));
    }
    Ok(AllocationDocument {
        fingerprint: fp.to_string(),
        meta: AllocationMeta {
            algorithm: algorithm.to_string(),
            seed,
        },
        allocation,
    })
}

fn condition_token(c: Condition) -> &'static str {
    match c {
        Condition::IR => "ir",
        Condition::Singleton => "singleton",
        Condition::SwapIn => "swap-in",
        Condition::Retiming => "retiming",
        Condition::FourPrime => "four-prime",
        Condition::General => "general",
    }
}

fn contracts(market: &Market, ks: &[Contract]) -> String {
    ks.iter().map(|k| market.display_contract(k)).collect::<Vec<_>>().join(" ")
}

fn witness_line(market: &Market, w: &BlockWitness) -> String {
    let mut s = format!("witness condition={} college={}", condition_token(w.condition), market.college(w.college).id);
    if let Some(ir) = w.ir {
        write!(s, " violation={ir:?}").expect("write to string");
    }
    write!(s, " in=[{}] out=[{}]", contracts(market, &w.contracts_in), contracts(market, &w.contracts_out)).expect("write to string");
    s
}

/// Verdict as text: mode, result and one line per witness.
pub fn render_verdict(market: &Market, v: &StabilityVerdict) -> String {
    let mut out = format!("mode={}\nstable={}\nwitnesses={}\n", v.mode.token(), v.stable, v.witnesses.len());
    for w in &v.witnesses {
        out.push_str(&witness_line(market, w));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed: u64,
    pub config: String,
}

/// Batch manifest: header then one `seed config-path` pair per line.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, FormatError> {
    let mut it = lines(text);
    match it.next() {
        Some(l) if l.words.len() == 1 && l.words[0].1 == MANIFEST_HEADER => {}
        Some(l) => return Err(FormatError::at(l.number, 1, FormatCode::MissingHeader, format!("expected {MANIFEST_HEADER}"))),
        None => return Err(FormatError::at(0, 0, FormatCode::MissingHeader, format!("expected {MANIFEST_HEADER}"))),
    }
    it.map(|l| {
        if l.words.len() != 2 {
            return Err(FormatError::at(l.number, 1, FormatCode::MalformedField, "expected: seed config-path"));
        }
        let (c, s) = l.words[0];
        let seed = s
            .parse()
            .map_err(|_| FormatError::at(l.number, c, FormatCode::InvalidNumber, format!("invalid seed {s:?}")))?;
        Ok(ManifestEntry {
            seed,
            config: l.words[1].1.to_string(),
        })
    })
    .collect()
}

pub fn serialize_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for e in entries {
        writeln!(out, "{} {}", e.seed, e.config).expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::allocation_from_ids;
    use crate::fixtures;
    use crate::stability::is_stable;
    use Terms::*;

    const EX1: &str = "hadm-1\n[colleges]\nc q_state=1 q_self=1 policy=inverse-merit ranking=r,p\n[students]\np rol=c:1\nr rol=c:1,c:0\n";

    #[test]
    fn ex1_round_trip() {
        let m = parse_market(EX1).unwrap();
        assert_eq!(m, fixtures::ex1());
        assert_eq!(serialize_market(&m).unwrap(), EX1);
    }

    #[test]
    fn header_only_is_empty_market() {
        assert_eq!(parse_market("hadm-1\n").unwrap(), Market::empty());
        assert_eq!(parse_market("").unwrap_err().code, FormatCode::MissingHeader);
    }

    #[test]
    fn bad_terms_reports_position() {
        let text = EX1.replace("p rol=c:1", "p rol=c:2");
        let e = parse_market(&text).unwrap_err();
        assert_eq!(e.code, FormatCode::InvalidTerms);
        assert_eq!((e.line, e.column), (5, 7));
    }

    #[test]
    fn other_errors() {
        let cases = [
            (EX1.replace("q_self=1 ", ""), FormatCode::MissingKey),
            (EX1.replace("policy=inverse-merit", "policy=lottery"), FormatCode::InvalidPolicy),
            (EX1.replace("q_state=1", "q_state=x"), FormatCode::InvalidNumber),
            (EX1.replace("[students]", "[pupils]"), FormatCode::UnknownSection),
            (EX1.replace("p rol=c:1", "p rol=c:1 colour=red"), FormatCode::UnknownKey),
            (EX1.replace("p rol=c:1", "p rol=d:1"), FormatCode::Validation),
            (EX1.replace("hadm-1\n[colleges]\n", "hadm-1\n"), FormatCode::RecordOutsideSection),
        ];
        for (text, code) in cases {
            assert_eq!(parse_market(&text).unwrap_err().code, code, "{text}");
        }
    }

    #[test]
    fn attributes_round_trip() {
        let text = "hadm-1\n[colleges]\nc q_state=2 q_self=0 policy=merit ranking=a county=cap capital=true full_time=false\n[students]\na rol=c:1 county=x capital=false tag.disadvantaged=1\n";
        let doc = parse_instance(text).unwrap();
        assert_eq!(serialize_instance(&doc).unwrap(), text);
    }

    #[test]
    fn smti_section_round_trip() {
        let text = "hadm-1\n[colleges]\n[students]\n[smti]\nman m1 prefs=w1,w2\nman m2 prefs=w2\nstrict w1 prefs=m1\ntied w2 men=m1,m2\n";
        let doc = parse_instance(text).unwrap();
        assert_eq!(doc.smti.as_ref().unwrap().men.len(), 2);
        assert_eq!(serialize_instance(&doc).unwrap(), text);
    }

    #[test]
    fn allocation_round_trip() {
        let m = fixtures::ex1();
        let y = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        let meta = AllocationMeta::new("sp-da", None);
        let text = serialize_allocation(&m, &y, &meta).unwrap();
        assert!(text.contains("[assigned]\nr,c,1\n[unassigned]\np\n"));
        let doc = parse_allocation(&text, &m).unwrap();
        assert_eq!(doc.allocation, y);
        assert_eq!(doc.meta, meta);
        let empty = serialize_allocation(&m, &Allocation::new(), &AllocationMeta::new("none", Some(3))).unwrap();
        assert!(empty.ends_with("[assigned]\n[unassigned]\np\nr\n"));
        assert!(parse_allocation(&empty, &m).unwrap().allocation.is_empty());
    }

    #[test]
    fn tampered_fingerprint_is_rejected() {
        let m = fixtures::ex1();
        let text = serialize_allocation(&m, &Allocation::new(), &AllocationMeta::new("x", None)).unwrap();
        let fp = fingerprint(&m);
        let tampered = text.replace(&fp, &fp.replace(&fp[..1], if &fp[..1] == "0" { "1" } else { "0" }));
        assert_eq!(parse_allocation(&tampered, &m).unwrap_err().code, FormatCode::FingerprintMismatch);
        assert_eq!(parse_allocation(&text, &fixtures::ex2()).unwrap_err().code, FormatCode::FingerprintMismatch);
    }

    #[test]
    fn allocation_must_list_everyone_once() {
        let m = fixtures::ex1();
        let text = serialize_allocation(&m, &Allocation::new(), &AllocationMeta::new("x", None)).unwrap();
        assert_eq!(parse_allocation(&text.replace("p\n", ""), &m).unwrap_err().code, FormatCode::UnknownStudent);
        let twice = text.replace("[unassigned]\n", "[assigned]\np,c,1\n[unassigned]\n");
        assert_eq!(parse_allocation(&twice, &m).unwrap_err().code, FormatCode::DuplicateStudent);
    }

    #[test]
    fn verdict_rendering() {
        let m = fixtures::ex1();
        let y = allocation_from_ids(&m, &[("p", "c", StateFunded)]);
        let text = render_verdict(&m, &is_stable(&m, &y).unwrap());
        assert!(text.starts_with("mode=full\nstable=false\n"));
        assert!(text.contains("witness condition=singleton college=c in=[r,c,1] out=[p,c,1]"));
    }

    #[test]
    fn manifest_round_trip() {
        let entries = vec![
            ManifestEntry {
                seed: 1,
                config: "a.toml".into(),
            },
            ManifestEntry {
                seed: 2,
                config: "b.toml".into(),
            },
        ];
        let text = serialize_manifest(&entries);
        assert_eq!(parse_manifest(&text).unwrap(), entries);
        assert_eq!(parse_manifest("hadm-manifest-1\nx a.toml\n").unwrap_err().code, FormatCode::InvalidNumber);
    }
}
