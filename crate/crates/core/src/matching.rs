//! Reference similarity, overall similarity and best-matching of places
//! against gazetteer candidates.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, SpatialError};
use crate::gazetteer::{normalize_name, Footprint, Gazetteer, GazetteerEntry};
use crate::graph::{PlaceNode, RelationKind};
use crate::spatial::{
    derive_alr, search_space, spatial_similarity, Alr, NearBufferConfig, ReferenceFrame, RelationInput, SearchSpace,
    SpatialContext,
};

const DEFAULT_DICTIONARY: &str = include_str!("../data/dictionary.tsv");

pub const STOP_WORDS: [&str; 5] = ["of", "the", "a", "an", "and"];

/// Symmetric token-pair similarities plus abbreviation pairs.
///
/// File format: UTF-8 lines `token<TAB>token<TAB>score` or `abbr<TAB>short<TAB>full`;
/// blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticDictionary {
    pairs: HashMap<(String, String), f64>,
    abbreviations: BTreeSet<(String, String)>,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl SemanticDictionary {
    pub fn empty() -> Self {
        SemanticDictionary::default()
    }

    /// The dictionary bundled with the crate.
    pub fn builtin() -> Self {
        SemanticDictionary::parse(DEFAULT_DICTIONARY).expect("bundled dictionary is valid")
    }

    pub fn parse(text: &str) -> Result<Self, MatchError> {
        let mut dict = SemanticDictionary::empty();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| MatchError::Dictionary {
                line: i + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(err("expected three tab-separated fields"));
            }
            if fields[0] == "abbr" {
                dict.add_abbreviation(fields[1], fields[2]);
            } else {
                let score: f64 = fields[2].parse().map_err(|_| err("score is not a number"))?;
                if !(0.0..=1.0).contains(&score) {
                    return Err(err("score must be in [0, 1]"));
                }
                dict.add_pair(fields[0], fields[1], score);
            }
        }
        Ok(dict)
    }

    pub fn add_pair(&mut self, a: &str, b: &str, score: f64) {
        let (a, b) = (normalize_name(a), normalize_name(b));
        self.pairs.insert(ordered(&a, &b), score.clamp(0.0, 1.0));
    }

    pub fn add_abbreviation(&mut self, short: &str, full: &str) {
        let short = normalize_name(short.trim_end_matches('.'));
        self.abbreviations.insert(ordered(&short, &normalize_name(full)));
    }

    pub fn is_abbreviation(&self, a: &str, b: &str) -> bool {
        self.abbreviations.contains(&ordered(a, b))
    }

    /// Stored similarity; identical tokens score 1.0.
    pub fn get_sim(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            return Some(1.0);
        }
        self.pairs.get(&ordered(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len() + self.abbreviations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A case-folded word; `abbreviated` records a trailing period in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub abbreviated: bool,
}

impl Token {
    pub fn new(text: &str) -> Self {
        Token {
            text: text.to_string(),
            abbreviated: false,
        }
    }
}

/// Splits on whitespace and punctuation, keeping apostrophes inside words.
pub fn tokenize(s: &str) -> Vec<Token> {
    let folded = normalize_name(&s.replace(['\u{2019}', '\u{2018}'], "'"));
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, abbreviated: bool, tokens: &mut Vec<Token>| {
        let t = cur.trim_matches('\'');
        if !t.is_empty() {
            tokens.push(Token {
                text: t.to_string(),
                abbreviated,
            });
        }
        cur.clear();
    };
    for ch in folded.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            cur.push(ch);
        } else {
            flush(&mut cur, ch == '.', &mut tokens);
        }
    }
    flush(&mut cur, false, &mut tokens);
    tokens
}

/// Unrestricted Damerau-Levenshtein distance over Unicode scalar values.
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    let max = n + m;
    let width = m + 2;
    // (n + 2) x (m + 2) table with a sentinel border row and column.
    let mut d = vec![0usize; (n + 2) * width];
    let at = |i: usize, j: usize| i * width + j;
    d[at(0, 0)] = max;
    for i in 0..=n {
        d[at(i + 1, 0)] = max;
        d[at(i + 1, 1)] = i;
    }
    for j in 0..=m {
        d[at(0, j + 1)] = max;
        d[at(1, j + 1)] = j;
    }
    let mut last_row: HashMap<char, usize> = HashMap::new();
    for i in 1..=n {
        let mut last_match_col = 0;
        for j in 1..=m {
            let i1 = *last_row.get(&b[j - 1]).unwrap_or(&0);
            let j1 = last_match_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_match_col = j;
                0
            } else {
                1
            };
            let substitution = d[at(i, j)] + cost;
            let insertion = d[at(i + 1, j)] + 1;
            let deletion = d[at(i, j + 1)] + 1;
            let transposition = d[at(i1, j1)] + (i - i1 - 1) + 1 + (j - j1 - 1);
            d[at(i + 1, j + 1)] = substitution.min(insertion).min(deletion).min(transposition);
        }
        last_row.insert(a[i - 1], i);
    }
    d[at(n + 1, m + 1)]
}

/// `1 - DL(a, b) / max(|a|, |b|)`, in characters.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - damerau_levenshtein(a, b) as f64 / longest as f64
}

fn hinted_prefix(short: &Token, long: &Token) -> bool {
    short.abbreviated && short.text.chars().count() >= 2 && long.text.starts_with(&short.text)
}

pub fn token_similarity(a: &Token, b: &Token, dict: &SemanticDictionary) -> f64 {
    if dict.is_abbreviation(&a.text, &b.text) {
        return 1.0;
    }
    if let Some(s) = dict.get_sim(&a.text, &b.text) {
        return s;
    }
    if hinted_prefix(a, b) || hinted_prefix(b, a) {
        return 1.0;
    }
    edit_similarity(&a.text, &b.text)
}

/// Reference tokens with stop words removed, unless that would leave none.
pub fn reference_tokens(reference: &str) -> Vec<Token> {
    let all = tokenize(reference);
    let kept: Vec<Token> = all
        .iter()
        .filter(|t| !STOP_WORDS.contains(&t.text.as_str()))
        .cloned()
        .collect();
    if kept.is_empty() {
        all
    } else {
        kept
    }
}

/// Tokens of the entry name and of every tag value.
pub fn entry_tokens(entry: &GazetteerEntry) -> Result<Vec<Token>, MatchError> {
    let mut pool = tokenize(&entry.name);
    if pool.is_empty() {
        return Err(MatchError::EmptyEntryName(entry.entry_id.clone()));
    }
    for v in entry.tags.values() {
        pool.extend(tokenize(v));
    }
    Ok(pool)
}

fn pooled_similarity(reference: &[Token], pool: &[Token], dict: &SemanticDictionary) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    let total: f64 = reference
        .iter()
        .map(|r| pool.iter().map(|t| token_similarity(r, t, dict)).fold(0.0, f64::max))
        .sum();
    total / reference.len() as f64
}

/// Mean over reference tokens of the best token similarity against the entry's
/// name and tag tokens.
pub fn reference_similarity(
    reference: &str,
    entry: &GazetteerEntry,
    dict: &SemanticDictionary,
) -> Result<f64, MatchError> {
    let pool = entry_tokens(entry)?;
    Ok(pooled_similarity(&reference_tokens(reference), &pool, dict))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchWeights {
    pub w_ref: f64,
    pub w_spat: f64,
}

impl Default for MatchWeights {
    fn default() -> Self {
        MatchWeights {
            w_ref: 0.7,
            w_spat: 0.3,
        }
    }
}

impl MatchWeights {
    pub fn new(w_ref: f64, w_spat: f64) -> Result<Self, MatchError> {
        let w = MatchWeights { w_ref, w_spat };
        w.validate()?;
        Ok(w)
    }

    /// Rescales two non-negative weights to sum to one.
    pub fn normalized(w_ref: f64, w_spat: f64) -> Result<Self, MatchError> {
        let sum = w_ref + w_spat;
        if !(w_ref >= 0.0 && w_spat >= 0.0 && sum > 0.0 && sum.is_finite()) {
            return Err(MatchError::InvalidWeights(format!("{w_ref},{w_spat}")));
        }
        MatchWeights::new(w_ref / sum, w_spat / sum)
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        let ok = self.w_ref >= 0.0 && self.w_spat >= 0.0 && ((self.w_ref + self.w_spat) - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(MatchError::InvalidWeights(format!(
                "{},{} (must be non-negative and sum to 1)",
                self.w_ref, self.w_spat
            )))
        }
    }
}

impl FromStr for MatchWeights {
    type Err = MatchError;

    /// Parses `w_ref,w_spat`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MatchError::InvalidWeights(s.to_string());
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        MatchWeights::new(a, b)
    }
}

impl fmt::Display for MatchWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.w_ref, self.w_spat)
    }
}

pub fn overall_similarity(ref_sim: f64, spat_sim: f64, w: &MatchWeights) -> f64 {
    w.w_ref * ref_sim + w.w_spat * spat_sim
}

/// One relation from the place being matched to an already geo-referenced place.
#[derive(Debug, Clone, Copy)]
pub struct Constraint<'a> {
    pub relatum_id: &'a str,
    pub kind: RelationKind,
    pub relatum: &'a Footprint,
    pub frame: Option<ReferenceFrame>,
}

/// Search spaces for every constraint, skipping ones that cannot produce a
/// region (topological relations to non-polygon relata).
pub fn search_spaces(
    constraints: &[Constraint<'_>],
    context: &SpatialContext,
    near: &NearBufferConfig,
) -> Vec<SearchSpace> {
    constraints
        .iter()
        .filter_map(
            |c| match search_space(c.kind, c.relatum_id, c.relatum, context, near, c.frame.as_ref()) {
                Ok(s) => Some(s),
                Err(e) => {
                    log::debug!("skipping constraint to {}: {e}", c.relatum_id);
                    None
                }
            },
        )
        .collect()
}

/// Approximate location region from the given constraints. Without any usable
/// search space the whole context window is returned at low confidence.
pub fn approximate_location(
    place_id: &str,
    constraints: &[Constraint<'_>],
    context: &SpatialContext,
    near: &NearBufferConfig,
) -> Result<(Alr, Vec<SearchSpace>), MatchError> {
    if constraints.is_empty() {
        return Err(MatchError::Unconstrained(place_id.to_string()));
    }
    let spaces = search_spaces(constraints, context, near);
    match derive_alr(&spaces, context) {
        Ok(alr) => Ok((alr, spaces)),
        Err(SpatialError::NoSearchSpaces) => Ok((
            Alr {
                region: crate::spatial::Region::from_rect(context.window()),
                low_confidence: true,
                relaxed: Vec::new(),
            },
            spaces,
        )),
        Err(e) => unreachable!("derive_alr only fails on empty input: {e}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub entry_id: String,
    pub reference: String,
    pub ref_sim: f64,
    pub spat_sim: f64,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub place_id: String,
    pub entry_id: String,
    pub score: f64,
    pub ref_sim: f64,
    pub spat_sim: f64,
    /// Every (reference, candidate) pair that was scored.
    pub table: Vec<ScoreRow>,
}

/// `true` if `a` should replace `b` as the best row.
fn better(a: &ScoreRow, b: &ScoreRow) -> bool {
    if a.overall != b.overall {
        return a.overall > b.overall;
    }
    if a.ref_sim != b.ref_sim {
        return a.ref_sim > b.ref_sim;
    }
    a.entry_id < b.entry_id
}

/// Scores each candidate against every reference of `place` and returns the
/// best pair. Spatial similarity is computed once per candidate.
pub fn rank_candidates(
    place: &PlaceNode,
    candidates: &[&GazetteerEntry],
    constraints: &[Constraint<'_>],
    context: &SpatialContext,
    near: &NearBufferConfig,
    weights: &MatchWeights,
    dict: &SemanticDictionary,
) -> Result<MatchResult, MatchError> {
    if candidates.is_empty() {
        return Err(MatchError::NoCandidates(place.id.clone()));
    }
    let relations: Vec<RelationInput<'_>> = constraints
        .iter()
        .map(|c| RelationInput {
            kind: c.kind,
            relatum: c.relatum,
            frame: c.frame,
        })
        .collect();
    let refs: Vec<(String, Vec<Token>)> = place
        .references
        .iter()
        .map(|r| (r.clone(), reference_tokens(r)))
        .collect();

    let mut table = Vec::with_capacity(candidates.len() * refs.len());
    for cand in candidates {
        let pool = entry_tokens(cand)?;
        let spat = spatial_similarity(&cand.footprint, &relations, context, near).score;
        for (reference, tokens) in &refs {
            let r = pooled_similarity(tokens, &pool, dict);
            table.push(ScoreRow {
                entry_id: cand.entry_id.clone(),
                reference: reference.clone(),
                ref_sim: r,
                spat_sim: spat,
                overall: overall_similarity(r, spat, weights),
            });
        }
    }
    let best = table
        .iter()
        .fold(None::<&ScoreRow>, |acc, row| match acc {
            Some(b) if !better(row, b) => Some(b),
            _ => Some(row),
        })
        .ok_or_else(|| MatchError::NoCandidates(place.id.clone()))?
        .clone();
    Ok(MatchResult {
        place_id: place.id.clone(),
        entry_id: best.entry_id,
        score: best.overall,
        ref_sim: best.ref_sim,
        spat_sim: best.spat_sim,
        table,
    })
}

/// Derives the place's approximate location region, fetches the gazetteer
/// entries intersecting it and returns the best-scoring one.
pub fn best_match(
    place: &PlaceNode,
    constraints: &[Constraint<'_>],
    context: &SpatialContext,
    gazetteer: &Gazetteer,
    near: &NearBufferConfig,
    weights: &MatchWeights,
    dict: &SemanticDictionary,
) -> Result<(MatchResult, Alr), MatchError> {
    let (alr, _) = approximate_location(&place.id, constraints, context, near)?;
    let candidates = gazetteer.query_region(&alr.region);
    let result = rank_candidates(place, &candidates, constraints, context, near, weights, dict)?;
    Ok((result, alr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use geo::{Coord, Rect};

    fn tok(s: &str) -> Token {
        tokenize(s).remove(0)
    }

    fn texts(ts: &[Token]) -> Vec<&str> {
        ts.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn tokenizer_rules() {
        let t = tokenize("St Paul's Cathedral");
        assert_eq!(texts(&t), ["st", "paul's", "cathedral"]);
        let t = tokenize("Fed Sq.");
        assert_eq!(texts(&t), ["fed", "sq"]);
        assert!(!t[0].abbreviated && t[1].abbreviated);
        assert_eq!(
            texts(&tokenize("  'quoted'  (words), here!")),
            ["quoted", "words", "here"]
        );
        assert_eq!(texts(&tokenize("Caf\u{e9} Paul\u{2019}s")), ["cafe", "paul's"]);
        assert!(tokenize(" .,; ").is_empty());
    }

    #[test]
    fn stop_words_dropped_from_references_only() {
        assert_eq!(
            texts(&reference_tokens("Cathedral of St Paul's")),
            ["cathedral", "st", "paul's"]
        );
        assert_eq!(texts(&reference_tokens("the")), ["the"]);
    }

    #[test]
    fn dl_examples() {
        assert_eq!(damerau_levenshtein("fed", "federation"), 7);
        assert_eq!(damerau_levenshtein("ca", "abc"), 2);
        assert_eq!(damerau_levenshtein("abcd", "acbd"), 1);
        assert_eq!(damerau_levenshtein("", "abc"), 3);
        assert_eq!(damerau_levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn token_similarity_examples() {
        let dict = SemanticDictionary::builtin();
        assert_eq!(token_similarity(&tok("sq."), &tok("square"), &dict), 1.0);
        assert_eq!(token_similarity(&tok("station"), &tok("station"), &dict), 1.0);
        let empty = SemanticDictionary::empty();
        assert_relative_eq!(token_similarity(&tok("fed"), &tok("federation"), &empty), 0.3);
        assert_eq!(token_similarity(&tok("fed."), &tok("federation"), &empty), 1.0);
        assert_relative_eq!(token_similarity(&tok("f."), &tok("federation"), &empty), 0.1);
        assert_relative_eq!(token_similarity(&tok("square"), &tok("plaza"), &dict), 0.9);
        assert_relative_eq!(token_similarity(&tok("plaza"), &tok("square"), &dict), 0.9);
    }

    #[test]
    fn dictionary_parsing() {
        let d = SemanticDictionary::parse("# c\n\nabbr\tSt.\tSaint\nhill\tmount\t0.5\n").unwrap();
        assert!(d.is_abbreviation("saint", "st"));
        assert_eq!(d.get_sim("mount", "hill"), Some(0.5));
        assert_eq!(d.get_sim("x", "x"), Some(1.0));
        assert!(matches!(
            SemanticDictionary::parse("a\tb\n"),
            Err(MatchError::Dictionary { line: 1, .. })
        ));
        assert!(SemanticDictionary::parse("a\tb\t1.5").is_err());
        assert!(SemanticDictionary::parse("a\tb\tx").is_err());
        assert!(SemanticDictionary::builtin().len() > 20);
    }

    fn pt_entry(id: &str, name: &str, x: f64, y: f64) -> GazetteerEntry {
        GazetteerEntry::new(id, name, Footprint::point(x, y))
    }

    #[test]
    fn reference_similarity_examples() {
        let dict = SemanticDictionary::builtin();
        let e = pt_entry("c", "St Paul's Cathedral", 0.0, 0.0);
        assert_eq!(reference_similarity("St Paul's Cathedral", &e, &dict).unwrap(), 1.0);
        assert_eq!(reference_similarity("Cathedral of St Paul's", &e, &dict).unwrap(), 1.0);
        let rb = pt_entry("rb", "Richard Berry", 0.0, 0.0)
            .with_tag("department", "Mathematics and Statistics")
            .with_tag("type", "building");
        assert_eq!(reference_similarity("mathematics building", &rb, &dict).unwrap(), 1.0);
        let blank = pt_entry("z", " ", 0.0, 0.0);
        assert!(matches!(
            reference_similarity("x", &blank, &dict),
            Err(MatchError::EmptyEntryName(_))
        ));
    }

    #[test]
    fn overall_examples() {
        let w = MatchWeights::default();
        assert_relative_eq!(overall_similarity(0.9, 0.5, &w), 0.78);
        assert_eq!(
            overall_similarity(0.42, 0.9, &MatchWeights::new(1.0, 0.0).unwrap()),
            0.42
        );
        assert_eq!(
            overall_similarity(0.42, 0.2, &MatchWeights::new(0.0, 1.0).unwrap()),
            0.2
        );
        assert!(MatchWeights::new(0.5, 0.6).is_err());
        assert!(MatchWeights::new(-0.1, 1.1).is_err());
        assert_eq!(
            "0.6, 0.4".parse::<MatchWeights>().unwrap(),
            MatchWeights::new(0.6, 0.4).unwrap()
        );
        assert!("0.6".parse::<MatchWeights>().is_err());
        assert_eq!(MatchWeights::normalized(7.0, 3.0).unwrap(), MatchWeights::default());
    }

    fn ctx() -> SpatialContext {
        SpatialContext::new(Rect::new(Coord { x: -500.0, y: -500.0 }, Coord { x: 500.0, y: 500.0 }))
    }

    fn node(id: &str, refs: &[&str]) -> PlaceNode {
        PlaceNode {
            id: id.into(),
            references: refs.iter().map(|s| s.to_string()).collect(),
            annotation: None,
        }
    }

    #[test]
    fn federation_square_wins_for_node_b() {
        let dict = SemanticDictionary::builtin();
        let station = Footprint::rect(-150.0, -40.0, 140.0, 40.0);
        let cathedral = Footprint::rect(255.0, -20.0, 305.0, 20.0);
        let cands = [
            pt_entry("ipc", "Ian Potter Centre", 330.0, -50.0),
            GazetteerEntry::new("fs", "Federation Square", Footprint::rect(260.0, -120.0, 340.0, -60.0)),
            pt_entry("kg", "Kirra Galleries", 250.0, -70.0),
        ];
        let refs: Vec<&GazetteerEntry> = cands.iter().collect();
        let b = node("b", &["Fed Sq.", "the large square"]);
        let cons = [
            Constraint {
                relatum_id: "a",
                kind: RelationKind::EastOf,
                relatum: &station,
                frame: None,
            },
            Constraint {
                relatum_id: "c",
                kind: RelationKind::SouthOf,
                relatum: &cathedral,
                frame: None,
            },
            Constraint {
                relatum_id: "c",
                kind: RelationKind::Near,
                relatum: &cathedral,
                frame: None,
            },
        ];
        let r = rank_candidates(
            &b,
            &refs,
            &cons,
            &ctx(),
            &NearBufferConfig::default(),
            &MatchWeights::default(),
            &dict,
        )
        .unwrap();
        assert_eq!(r.entry_id, "fs");
        assert_eq!(r.table.len(), 6);
        let max = r.table.iter().map(|row| row.overall).fold(0.0, f64::max);
        assert_eq!(r.score, max);
    }

    #[test]
    fn closer_twin_wins() {
        let dict = SemanticDictionary::builtin();
        let anchor = Footprint::point(0.0, 0.0);
        let near = NearBufferConfig {
            alpha: 100.0,
            beta: 0.0,
            gamma: 0.0,
        };
        let cands = [
            pt_entry("x1", "Corner Cafe", 10.0, 0.0),
            pt_entry("x0", "Corner Cafe", 95.0, 0.0),
        ];
        let refs: Vec<&GazetteerEntry> = cands.iter().collect();
        let cons = [Constraint {
            relatum_id: "a",
            kind: RelationKind::Near,
            relatum: &anchor,
            frame: None,
        }];
        let r = rank_candidates(
            &node("p", &["corner cafe"]),
            &refs,
            &cons,
            &ctx(),
            &near,
            &MatchWeights::default(),
            &dict,
        )
        .unwrap();
        assert_eq!(r.entry_id, "x1");
    }

    #[test]
    fn ties_break_on_entry_id() {
        let dict = SemanticDictionary::builtin();
        let anchor = Footprint::point(0.0, 0.0);
        let cands = [pt_entry("b", "Kiosk", 0.0, 50.0), pt_entry("a", "Kiosk", 0.0, -50.0)];
        let refs: Vec<&GazetteerEntry> = cands.iter().collect();
        let cons = [Constraint {
            relatum_id: "z",
            kind: RelationKind::Near,
            relatum: &anchor,
            frame: None,
        }];
        let r = rank_candidates(
            &node("p", &["kiosk"]),
            &refs,
            &cons,
            &ctx(),
            &NearBufferConfig::default(),
            &MatchWeights::default(),
            &dict,
        )
        .unwrap();
        assert_eq!(r.entry_id, "a");
    }

    #[test]
    fn best_match_errors() {
        let dict = SemanticDictionary::builtin();
        let gaz = Gazetteer::from_entries(vec![pt_entry("far", "Far Away", 1e6, 1e6)]).unwrap();
        let p = node("p", &["thing"]);
        let cfg = NearBufferConfig::default();
        let w = MatchWeights::default();
        assert!(matches!(
            best_match(&p, &[], &ctx(), &gaz, &cfg, &w, &dict),
            Err(MatchError::Unconstrained(_))
        ));
        let anchor = Footprint::point(0.0, 0.0);
        let cons = [Constraint {
            relatum_id: "a",
            kind: RelationKind::Near,
            relatum: &anchor,
            frame: None,
        }];
        assert!(matches!(
            best_match(&p, &cons, &ctx(), &gaz, &cfg, &w, &dict),
            Err(MatchError::NoCandidates(_))
        ));
    }

    #[test]
    fn single_candidate_always_wins() {
        let dict = SemanticDictionary::builtin();
        let anchor = Footprint::point(0.0, 0.0);
        let gaz = Gazetteer::from_entries(vec![pt_entry("only", "Zzz", 30.0, 0.0)]).unwrap();
        let cons = [Constraint {
            relatum_id: "a",
            kind: RelationKind::Near,
            relatum: &anchor,
            frame: None,
        }];
        let (r, alr) = best_match(
            &node("p", &["unrelated words"]),
            &cons,
            &ctx(),
            &gaz,
            &NearBufferConfig::default(),
            &MatchWeights::default(),
            &dict,
        )
        .unwrap();
        assert_eq!(r.entry_id, "only");
        assert!(!alr.low_confidence);
    }
}
