//! Context-free grammars with a lexicon.
//!
//! Text format, one declaration per line:
//!
//! ```text
//! # comment
//! S -> NP VP
//! A ->            # empty right-hand side
//! lex n dog       # word "dog" may carry category n
//! start S         # optional; defaults to the head of the first rule
//! ```
//!
//! Symbols that appear as a rule head are nonterminals, every other symbol
//! is a terminal category.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

impl SymbolId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub u32);

impl RuleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symbol {
    pub id: SymbolId,
    pub name: String,
    pub kind: SymbolKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub head: SymbolId,
    pub rhs: Vec<SymbolId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("start symbol `{0}` is not the head of any rule")]
    UndeclaredStart(String),
    #[error("line {line}: `{category}` is a nonterminal and cannot be a lexical category")]
    LexicalNonterminal { line: usize, category: String },
    #[error("grammar has no rules")]
    NoRules,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    symbols: Vec<Symbol>,
    rules: Vec<Rule>,
    start: SymbolId,
    lexicon: BTreeMap<String, BTreeSet<SymbolId>>,
    by_name: HashMap<String, SymbolId>,
    rules_by_head: Vec<Vec<RuleId>>,
}

impl Grammar {
    /// Build a grammar from already-resolved parts. Symbol kinds are derived:
    /// anything that heads a rule is a nonterminal.
    pub fn from_parts(
        names: Vec<String>,
        rules: Vec<(SymbolId, Vec<SymbolId>)>,
        start: SymbolId,
        lexicon: BTreeMap<String, BTreeSet<SymbolId>>,
    ) -> Result<Self, GrammarError> {
        if rules.is_empty() {
            return Err(GrammarError::NoRules);
        }
        let mut is_head = alloc::vec![false; names.len()];
        for (head, _) in &rules {
            is_head[head.index()] = true;
        }
        let symbols: Vec<Symbol> = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| Symbol {
                id: SymbolId(i as u32),
                name,
                kind: if is_head[i] {
                    SymbolKind::Nonterminal
                } else {
                    SymbolKind::Terminal
                },
            })
            .collect();
        if !is_head[start.index()] {
            return Err(GrammarError::UndeclaredStart(symbols[start.index()].name.clone()));
        }
        for cats in lexicon.values() {
            for c in cats {
                if is_head[c.index()] {
                    return Err(GrammarError::LexicalNonterminal {
                        line: 0,
                        category: symbols[c.index()].name.clone(),
                    });
                }
            }
        }
        let mut rules_by_head = alloc::vec![Vec::new(); symbols.len()];
        let rules: Vec<Rule> = rules
            .into_iter()
            .enumerate()
            .map(|(i, (head, rhs))| {
                rules_by_head[head.index()].push(RuleId(i as u32));
                Rule {
                    id: RuleId(i as u32),
                    head,
                    rhs,
                }
            })
            .collect();
        let by_name = symbols.iter().map(|s| (s.name.clone(), s.id)).collect();
        Ok(Grammar {
            symbols,
            rules,
            start,
            lexicon,
            by_name,
            rules_by_head,
        })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.index()]
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id.index()].name
    }

    pub fn symbol_by_name(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn is_terminal(&self, id: SymbolId) -> bool {
        self.symbols[id.index()].kind == SymbolKind::Terminal
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.index()]
    }

    pub fn rules_for(&self, head: SymbolId) -> &[RuleId] {
        &self.rules_by_head[head.index()]
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn lexicon(&self) -> &BTreeMap<String, BTreeSet<SymbolId>> {
        &self.lexicon
    }

    /// Terminal categories a lexical key may carry, ordered by symbol id.
    /// Unknown keys yield an empty set.
    pub fn categories_of_key(&self, key: &str) -> impl Iterator<Item = SymbolId> + '_ {
        self.lexicon.get(key).into_iter().flat_map(|s| s.iter().copied())
    }
}

/// Parse the line-oriented grammar format. Rule ids follow file order and
/// repeated lexicon lines are merged.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, SymbolId> = HashMap::new();
    let mut intern = |name: &str, names: &mut Vec<String>| -> SymbolId {
        *ids.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            SymbolId(names.len() as u32 - 1)
        })
    };

    let mut rules = Vec::new();
    let mut lex_lines: Vec<(usize, String, SymbolId)> = Vec::new();
    let mut start: Option<(usize, String)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let syntax = |message: &str| GrammarError::Syntax {
            line: line_no,
            message: message.to_string(),
        };
        if toks.len() >= 2 && toks[1] == "->" {
            if toks[0] == "->" {
                return Err(syntax("missing rule head"));
            }
            if toks[2..].contains(&"->") {
                return Err(syntax("more than one `->` in rule"));
            }
            let head = intern(toks[0], &mut names);
            let rhs = toks[2..].iter().map(|t| intern(t, &mut names)).collect();
            rules.push((head, rhs));
        } else if toks[0] == "lex" {
            if toks.len() != 3 {
                return Err(syntax("expected `lex CATEGORY word`"));
            }
            let cat = intern(toks[1], &mut names);
            lex_lines.push((line_no, toks[2].to_string(), cat));
        } else if toks[0] == "start" {
            if toks.len() != 2 {
                return Err(syntax("expected `start SYMBOL`"));
            }
            if start.is_some() {
                return Err(syntax("duplicate start declaration"));
            }
            start = Some((line_no, toks[1].to_string()));
        } else {
            return Err(syntax("expected `HEAD -> ...`, `lex CAT word` or `start SYM`"));
        }
    }

    if rules.is_empty() {
        return Err(GrammarError::NoRules);
    }
    let start = match start {
        Some((_, name)) => match ids.get(&name) {
            Some(&id) if rules.iter().any(|(h, _)| *h == id) => id,
            _ => return Err(GrammarError::UndeclaredStart(name)),
        },
        None => rules[0].0,
    };

    let heads: BTreeSet<SymbolId> = rules.iter().map(|(h, _)| *h).collect();
    let mut lexicon: BTreeMap<String, BTreeSet<SymbolId>> = BTreeMap::new();
    for (line, word, cat) in lex_lines {
        if heads.contains(&cat) {
            return Err(GrammarError::LexicalNonterminal {
                line,
                category: names[cat.index()].clone(),
            });
        }
        lexicon.entry(word).or_default().insert(cat);
    }
    Grammar::from_parts(names, rules, start, lexicon)
}

impl fmt::Display for Grammar {
    /// Canonical text form; parses back to an equal grammar.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start {}", self.name(self.start))?;
        for r in &self.rules {
            write!(f, "{} ->", self.name(r.head))?;
            for s in &r.rhs {
                write!(f, " {}", self.name(*s))?;
            }
            writeln!(f)?;
        }
        for (word, cats) in &self.lexicon {
            for c in cats {
                writeln!(f, "lex {} {}", self.name(*c), word)?;
            }
        }
        Ok(())
    }
}
