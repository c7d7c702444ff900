// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Random surrogates for categories that carry no medical signal: names,
//! phone numbers, e-mails, URLs and identifiers.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::location::normalize_name;
use crate::model::{Tag, TaggedSpan};

const MALE: &str = include_str!("../data/names_male.txt");
const FEMALE: &str = include_str!("../data/names_female.txt");
const UNISEX: &str = include_str!("../data/names_unisex.txt");
const FAMILY: &str = include_str!("../data/names_family.txt");

// Redraws before accepting a surrogate equal to the original.
const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone)]
pub struct NamePools {
    pub male: Vec<String>,
    pub female: Vec<String>,
    pub unisex: Vec<String>,
    pub family: Vec<String>,
}

fn lines(source: &str) -> Vec<String> {
    source
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

impl NamePools {
    pub fn new(
        male: Vec<String>,
        female: Vec<String>,
        unisex: Vec<String>,
        family: Vec<String>,
    ) -> Result<Self> {
        for (label, pool) in [
            ("male", &male),
            ("female", &female),
            ("unisex", &unisex),
            ("family", &family),
        ] {
            if pool.is_empty() {
                return Err(Error::EmptyNamePool(label));
            }
        }
        Ok(NamePools {
            male,
            female,
            unisex,
            family,
        })
    }

    /// Loads four one-name-per-line files.
    pub fn load(male: &Path, female: &Path, unisex: &Path, family: &Path) -> Result<Self> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map(|s| lines(&s))
                .map_err(|e| Error::io(p, e))
        };
        Self::new(read(male)?, read(female)?, read(unisex)?, read(family)?)
    }
}

impl Default for NamePools {
    fn default() -> Self {
        NamePools::new(lines(MALE), lines(FEMALE), lines(UNISEX), lines(FAMILY))
            .expect("shipped pools are non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

const HONORIFICS: [(&str, Gender); 13] = [
    ("m", Gender::Male),
    ("mr", Gender::Male),
    ("monsieur", Gender::Male),
    ("mme", Gender::Female),
    ("madame", Gender::Female),
    ("mlle", Gender::Female),
    ("mademoiselle", Gender::Female),
    ("dr", Gender::Unknown),
    ("docteur", Gender::Unknown),
    ("pr", Gender::Unknown),
    ("professeur", Gender::Unknown),
    ("me", Gender::Unknown),
    ("maitre", Gender::Unknown),
];

/// A PER surface split into honorifics, first name(s) and surname.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedName<'a> {
    pub honorifics: Vec<&'a str>,
    pub first: Vec<&'a str>,
    pub surname: Option<&'a str>,
    pub gender: Gender,
}

/// Leading honorifics are stripped, the last remaining token is the surname
/// and anything between is the first name.
pub fn parse_name(full_name: &str) -> ParsedName<'_> {
    let tokens: Vec<&str> = full_name.split_whitespace().collect();
    let mut gender = Gender::Unknown;
    let mut n_honorifics = 0;
    for t in &tokens {
        let folded = normalize_name(t.trim_end_matches('.'));
        match HONORIFICS.iter().find(|(h, _)| *h == folded) {
            Some((_, g)) => {
                if *g != Gender::Unknown {
                    gender = *g;
                }
                n_honorifics += 1;
            }
            None => break,
        }
    }
    let rest = &tokens[n_honorifics..];
    ParsedName {
        honorifics: tokens[..n_honorifics].to_vec(),
        first: rest
            .split_last()
            .map(|(_, f)| f.to_vec())
            .unwrap_or_default(),
        surname: rest.last().copied(),
        gender,
    }
}

/// Per-document name memo: full name → substitute, surname → substitute
/// surname. Never shared between documents.
#[derive(Debug, Clone, Default)]
pub struct NameLookupTable {
    full: HashMap<String, (String, String)>,
    surnames: HashMap<String, String>,
}

impl NameLookupTable {
    pub fn surname(&self, original: &str) -> Option<&str> {
        self.surnames
            .get(&normalize_name(original))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.full.len() + self.surnames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn draw<R: Rng + ?Sized>(pool: &[String], avoid: &str, rng: &mut R) -> String {
    let avoid = normalize_name(avoid);
    let mut pick = pool.choose(rng).expect("pools are non-empty");
    for _ in 0..MAX_REDRAWS {
        if normalize_name(pick) != avoid {
            break;
        }
        pick = pool.choose(rng).expect("pools are non-empty");
    }
    pick.clone()
}

// An all-caps original (common for surnames in clinical notes) gets an
// all-caps substitute.
fn match_case(original: &str, substitute: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        substitute.to_uppercase()
    } else {
        substitute.to_string()
    }
}

/// Substitute for a PER surface, consistent within the document:
/// a known full name gets its stored substitute; a new first name with a
/// known surname reuses the surname's substitute; anything else gets a fresh
/// first name and surname. A lone token is treated as a surname.
pub fn substitute_name<R: Rng + ?Sized>(
    table: &mut NameLookupTable,
    pools: &NamePools,
    full_name: &str,
    rng: &mut R,
) -> String {
    let parsed = parse_name(full_name);
    let Some(surname) = parsed.surname else {
        return full_name.to_string();
    };
    let surname_key = normalize_name(surname);
    let first_joined = parsed.first.join(" ");

    let (first_sub, last_sub) = if parsed.first.is_empty() {
        let last = table
            .surnames
            .entry(surname_key)
            .or_insert_with(|| draw(&pools.family, surname, rng))
            .clone();
        (None, last)
    } else {
        let full_key = format!("{} {}", normalize_name(&first_joined), surname_key);
        if let Some((f, l)) = table.full.get(&full_key) {
            (Some(f.clone()), l.clone())
        } else {
            let last = table
                .surnames
                .entry(surname_key)
                .or_insert_with(|| draw(&pools.family, surname, rng))
                .clone();
            let pool = match parsed.gender {
                Gender::Male => &pools.male,
                Gender::Female => &pools.female,
                Gender::Unknown => &pools.unisex,
            };
            let first = draw(pool, &first_joined, rng);
            table.full.insert(full_key, (first.clone(), last.clone()));
            (Some(first), last)
        }
    };

    let mut parts: Vec<String> = parsed.honorifics.iter().map(|h| h.to_string()).collect();
    if let Some(f) = first_sub {
        parts.push(match_case(&first_joined, &f));
    }
    parts.push(match_case(surname, &last_sub));
    parts.join(" ")
}

fn random_like<R: Rng + ?Sized>(c: char, rng: &mut R) -> char {
    if c.is_ascii_digit() {
        char::from(b'0' + rng.gen_range(0..10u8))
    } else if c.is_alphabetic() && c.is_uppercase() {
        char::from(b'A' + rng.gen_range(0..26u8))
    } else if c.is_alphabetic() {
        char::from(b'a' + rng.gen_range(0..26u8))
    } else {
        c
    }
}

fn mask<R: Rng + ?Sized>(s: &str, rng: &mut R) -> String {
    s.chars().map(|c| random_like(c, rng)).collect()
}

/// Replaces every ASCII digit, leaving the rest. Used for temporal spans
/// that could not be resolved to a date.
pub fn randomize_digits<R: Rng + ?Sized>(s: &str, rng: &mut R) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_digit() {
                random_like(c, rng)
            } else {
                c
            }
        })
        .collect()
}

fn mask_phone<R: Rng + ?Sized>(s: &str, rng: &mut R) -> String {
    // keep the trunk prefix "0" or the country code "+NN"
    let kept = if let Some(rest) = s.strip_prefix('+') {
        1 + rest
            .chars()
            .take_while(char::is_ascii_digit)
            .take(2)
            .count()
    } else if s.starts_with('0') {
        1
    } else {
        0
    };
    let mut out: String = s.chars().take(kept).collect();
    let mut first_digit = true;
    for c in s.chars().skip(kept) {
        if c.is_ascii_digit() && first_digit && kept > 0 {
            out.push(char::from(b'1' + rng.gen_range(0..9u8)));
            first_digit = false;
        } else {
            if c.is_ascii_digit() {
                first_digit = false;
            }
            out.push(random_like(c, rng));
        }
    }
    out
}

fn mask_keep_tld<R: Rng + ?Sized>(host: &str, rng: &mut R) -> String {
    match host.rfind('.') {
        Some(dot) => format!("{}{}", mask(&host[..dot], rng), &host[dot..]),
        None => mask(host, rng),
    }
}

fn mask_email<R: Rng + ?Sized>(s: &str, rng: &mut R) -> String {
    match s.rfind('@') {
        Some(at) => format!(
            "{}@{}",
            mask(&s[..at], rng),
            mask_keep_tld(&s[at + 1..], rng)
        ),
        None => mask(s, rng),
    }
}

fn mask_url<R: Rng + ?Sized>(s: &str, rng: &mut R) -> String {
    let lower = s.to_ascii_lowercase();
    let mut prefix_len = ["https://", "http://"]
        .iter()
        .find(|p| lower.starts_with(*p))
        .map_or(0, |p| p.len());
    if lower[prefix_len..].starts_with("www.") {
        prefix_len += 4;
    }
    let (prefix, rest) = s.split_at(prefix_len);
    let host_end = rest.find(['/', '?', '#', ':']).unwrap_or(rest.len());
    let (host, tail) = rest.split_at(host_end);
    format!("{prefix}{}{}", mask_keep_tld(host, rng), mask(tail, rng))
}

/// Random substitute with the same shape as the span: digits stay digits,
/// letters stay letters of the same case, everything else is kept. Phone
/// prefixes, URL schemes and top-level domains are preserved.
pub fn substitute_formatted<R: Rng + ?Sized>(span: &TaggedSpan, rng: &mut R) -> String {
    let surface = span.surface.as_str();
    let once = |rng: &mut R| match span.tag {
        Tag::Phone => mask_phone(surface, rng),
        Tag::Email => mask_email(surface, rng),
        Tag::Url => mask_url(surface, rng),
        _ => mask(surface, rng),
    };
    let mut out = once(rng);
    for _ in 0..MAX_REDRAWS {
        if out != surface {
            break;
        }
        out = once(rng);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Source;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(99)
    }

    fn span(tag: Tag, s: &str) -> TaggedSpan {
        TaggedSpan {
            start: 0,
            end: s.chars().count(),
            tag,
            source: Source::Merged,
            surface: s.to_string(),
        }
    }

    fn shape(s: &str) -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_digit() {
                    'd'
                } else if c.is_alphabetic() {
                    'a'
                } else {
                    c
                }
            })
            .collect()
    }

    #[test]
    fn parses_names() {
        let p = parse_name("M. Jean Dupont");
        assert_eq!(
            (p.honorifics, p.first, p.surname, p.gender),
            (vec!["M."], vec!["Jean"], Some("Dupont"), Gender::Male)
        );
        let p = parse_name("Dr Marie Claire MARTIN");
        assert_eq!(
            (p.first, p.surname, p.gender),
            (vec!["Marie", "Claire"], Some("MARTIN"), Gender::Unknown)
        );
        assert_eq!(parse_name("Dupont").first, Vec::<&str>::new());
        assert_eq!(parse_name("Dr.").surname, None);
    }

    #[test]
    fn repeated_full_name_gets_same_substitute() {
        let (mut t, p, mut r) = (NameLookupTable::default(), NamePools::default(), rng());
        let a = substitute_name(&mut t, &p, "Jean Dupont", &mut r);
        let b = substitute_name(&mut t, &p, "Jean Dupont", &mut r);
        assert_eq!(a, b);
        assert_ne!(a, "Jean Dupont");
    }

    #[test]
    fn shared_surname_stays_shared() {
        let (mut t, p, mut r) = (NameLookupTable::default(), NamePools::default(), rng());
        let a = substitute_name(&mut t, &p, "Jean Dupont", &mut r);
        let b = substitute_name(&mut t, &p, "Marie Dupont", &mut r);
        assert_eq!(a.split(' ').next_back(), b.split(' ').next_back());
        let c = substitute_name(&mut t, &p, "Dupont", &mut r);
        assert_eq!(Some(c.as_str()), a.split(' ').next_back());
    }

    #[test]
    fn single_token_takes_surname_path() {
        let (mut t, p, mut r) = (NameLookupTable::default(), NamePools::default(), rng());
        let a = substitute_name(&mut t, &p, "Dupont", &mut r);
        assert!(p.family.contains(&a));
        assert_eq!(t.surname("DUPONT"), Some(a.as_str()));
        let b = substitute_name(&mut t, &p, "Jean Dupont", &mut r);
        assert!(b.ends_with(&a));
    }

    #[test]
    fn honorific_picks_pool_and_is_kept() {
        let (mut t, p, mut r) = (NameLookupTable::default(), NamePools::default(), rng());
        let out = substitute_name(&mut t, &p, "Mme Jeanne DURAND", &mut r);
        let parts: Vec<_> = out.split(' ').collect();
        assert_eq!(parts[0], "Mme");
        assert!(p.female.contains(&parts[1].to_string()));
        assert_eq!(parts[2], parts[2].to_uppercase());
        let out = substitute_name(&mut t, &p, "M. Paul Roche", &mut r);
        assert!(p.male.iter().any(|m| out.contains(m.as_str())));
    }

    #[test]
    fn tables_are_independent() {
        let p = NamePools::default();
        let mut r = rng();
        let subs: Vec<String> = (0..20)
            .map(|_| substitute_name(&mut NameLookupTable::default(), &p, "Jean Dupont", &mut r))
            .collect();
        assert!(subs.iter().any(|s| s != &subs[0]));
    }

    #[test]
    fn phone_mask() {
        let out = substitute_formatted(&span(Tag::Phone, "03 84 11 22 33"), &mut rng());
        assert_eq!(shape(&out), "dd dd dd dd dd");
        assert!(out.starts_with('0'));
        assert_ne!(&out[1..2], "0");
        let out = substitute_formatted(&span(Tag::Phone, "+33 3 84 11 22 33"), &mut rng());
        assert!(out.starts_with("+33 "));
        assert_eq!(shape(&out), "+dd d dd dd dd dd");
    }

    #[test]
    fn email_mask_keeps_tld() {
        let out = substitute_formatted(&span(Tag::Email, "jean.dupont@chu.fr"), &mut rng());
        assert_eq!(shape(&out), "aaaa.aaaaaa@aaa.aa");
        assert!(out.ends_with(".fr"));
        assert_ne!(out, "jean.dupont@chu.fr");
    }

    #[test]
    fn url_mask_keeps_scheme_and_tld() {
        let out = substitute_formatted(
            &span(Tag::Url, "https://www.chu-belfort.fr/patient/123"),
            &mut rng(),
        );
        assert!(out.starts_with("https://www."));
        assert_eq!(shape(&out), shape("https://www.chu-belfort.fr/patient/123"));
        assert!(out.contains(".fr/"));
    }

    #[test]
    fn id_mask() {
        let out = substitute_formatted(&span(Tag::Id, "AB1234567"), &mut rng());
        assert_eq!(shape(&out), "aaddddddd");
        assert!(out.chars().take(2).all(|c| c.is_ascii_uppercase()));
    }

    #[test]
    fn pools_must_be_non_empty() {
        assert!(matches!(
            NamePools::new(vec!["a".into()], vec![], vec!["c".into()], vec!["d".into()]),
            Err(Error::EmptyNamePool("female"))
        ));
    }

    proptest::proptest! {
        #[test]
        fn mask_preserves_character_classes(s in "[a-zA-Z0-9 .@/_éÉ-]{1,30}", tag in 0usize..4) {
            let tag = [Tag::Phone, Tag::Email, Tag::Url, Tag::Id][tag];
            let out = substitute_formatted(&span(tag, &s), &mut rng());
            proptest::prop_assert_eq!(shape(&out), shape(&s));
        }
    }
}
