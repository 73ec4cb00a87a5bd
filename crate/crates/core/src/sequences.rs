//! Sequence records, FASTA input/output and family label tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A set of uppercase residue symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    name: String,
    symbols: Vec<u8>,
    member: [bool; 26],
    /// Symbol substituted for unknown characters under [`Policy::Replace`], if allowed.
    wildcard: Option<u8>,
}

impl Alphabet {
    /// Builds an alphabet from distinct uppercase letters.
    pub fn new(name: &str, symbols: &str, wildcard: Option<u8>) -> Result<Self> {
        let mut member = [false; 26];
        let mut ordered = Vec::with_capacity(symbols.len());
        for b in symbols.bytes() {
            if !b.is_ascii_uppercase() {
                return Err(Error::InvalidConfig(format!(
                    "alphabet symbol {:?} is not an uppercase letter",
                    b as char
                )));
            }
            let slot = &mut member[(b - b'A') as usize];
            if *slot {
                return Err(Error::InvalidConfig(format!(
                    "alphabet symbol {:?} repeated",
                    b as char
                )));
            }
            *slot = true;
            ordered.push(b);
        }
        if ordered.is_empty() {
            return Err(Error::InvalidConfig("alphabet has no symbols".into()));
        }
        if let Some(w) = wildcard {
            if !w.is_ascii_uppercase() || !member[(w - b'A') as usize] {
                return Err(Error::InvalidConfig("wildcard must belong to the alphabet".into()));
            }
        }
        Ok(Alphabet {
            name: name.to_string(),
            symbols: ordered,
            member,
            wildcard,
        })
    }

    /// The 20 standard amino acids plus the extended codes B, J, O, U, X and Z.
    pub fn protein() -> Self {
        Alphabet::new("protein", "ACDEFGHIKLMNPQRSTVWYBJOUXZ", Some(b'X')).unwrap()
    }

    pub fn dna() -> Self {
        Alphabet::new("dna", "ACGT", None).unwrap()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn contains(&self, b: u8) -> bool {
        b.is_ascii_uppercase() && self.member[(b - b'A') as usize]
    }

    pub fn wildcard(&self) -> Option<u8> {
        self.wildcard
    }
}

/// What to do with characters outside the alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    #[default]
    Strict,
    /// Substitute the alphabet's wildcard; alphabets without one still reject.
    Replace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub id: String,
    pub description: String,
    pub residues: String,
    pub family: Option<String>,
}

impl SequenceRecord {
    /// Validates and normalizes (uppercases) residues against `alphabet` under [`Policy::Strict`].
    pub fn new(id: &str, residues: &str, alphabet: &Alphabet) -> Result<Self> {
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!("invalid sequence id {id:?}")));
        }
        if residues.is_empty() {
            return Err(Error::Empty("sequence residues"));
        }
        let mut out = String::with_capacity(residues.len());
        for (i, c) in residues.chars().enumerate() {
            let u = c.to_ascii_uppercase();
            if !u.is_ascii() || !alphabet.contains(u as u8) {
                return Err(Error::parse(
                    "sequence",
                    1,
                    i + 1,
                    format!("character {c:?} outside {} alphabet", alphabet.name()),
                ));
            }
            out.push(u);
        }
        Ok(SequenceRecord {
            id: id.to_string(),
            description: String::new(),
            residues: out,
            family: None,
        })
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn with_family(mut self, family: impl Into<String>) -> Self {
        self.family = Some(family.into());
        self
    }
}

struct Pending {
    id: String,
    description: String,
    residues: String,
    header_line: usize,
}

/// Parses FASTA text into records in file order.
///
/// Lowercase residues are uppercased and whitespace inside sequence lines is ignored.
/// Errors carry the 1-based line and column of the offending input.
pub fn parse_fasta<R: BufRead>(mut input: R, alphabet: &Alphabet, policy: Policy) -> Result<Vec<SequenceRecord>> {
    const SRC: &str = "FASTA";
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<Pending> = None;
    let mut buf = String::new();
    let mut line_no = 0;

    let finish = |p: Pending, records: &mut Vec<SequenceRecord>| -> Result<()> {
        if p.residues.is_empty() {
            return Err(Error::parse(
                SRC,
                p.header_line,
                1,
                format!("record {:?} has an empty sequence", p.id),
            ));
        }
        records.push(SequenceRecord {
            id: p.id,
            description: p.description,
            residues: p.residues,
            family: None,
        });
        Ok(())
    };

    loop {
        buf.clear();
        if input.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = buf.trim_end_matches(['\n', '\r']);
        if let Some(header) = line.strip_prefix('>') {
            if let Some(p) = current.take() {
                finish(p, &mut records)?;
            }
            let header = header.trim_start();
            let (id, description) = match header.find(char::is_whitespace) {
                Some(pos) => (&header[..pos], header[pos..].trim()),
                None => (header, ""),
            };
            if id.is_empty() {
                return Err(Error::parse(SRC, line_no, 2, "header has no sequence id"));
            }
            if !seen.insert(id.to_string()) {
                return Err(Error::DuplicateId(id.to_string()));
            }
            current = Some(Pending {
                id: id.to_string(),
                description: description.to_string(),
                residues: String::new(),
                header_line: line_no,
            });
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(p) = current.as_mut() else {
            return Err(Error::parse(
                SRC,
                line_no,
                1,
                "sequence data before the first '>' header",
            ));
        };
        for (col, c) in line.chars().enumerate() {
            if c.is_whitespace() {
                continue;
            }
            let u = c.to_ascii_uppercase();
            if u.is_ascii() && alphabet.contains(u as u8) {
                p.residues.push(u);
                continue;
            }
            match (policy, alphabet.wildcard()) {
                (Policy::Replace, Some(w)) => p.residues.push(w as char),
                _ => {
                    return Err(Error::parse(
                        SRC,
                        line_no,
                        col + 1,
                        format!("character {c:?} outside {} alphabet", alphabet.name()),
                    ))
                }
            }
        }
    }
    if let Some(p) = current.take() {
        finish(p, &mut records)?;
    }
    if records.is_empty() {
        return Err(Error::Empty("FASTA input has no records"));
    }
    Ok(records)
}

/// Writes records as FASTA with sequence lines wrapped at 60 columns.
pub fn write_fasta<W: Write>(records: &[SequenceRecord], mut out: W) -> Result<()> {
    for r in records {
        if r.description.is_empty() {
            writeln!(out, ">{}", r.id)?;
        } else {
            writeln!(out, ">{} {}", r.id, r.description)?;
        }
        for chunk in r.residues.as_bytes().chunks(60) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Parsed id→family table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FamilyLabels {
    pub labels: HashMap<String, String>,
    /// Number of lines whose id had already been seen (later lines win).
    pub duplicates: usize,
}

/// Reads `id<TAB>family` lines. `#` lines and blank lines are skipped; extra columns are ignored.
pub fn load_family_labels<R: BufRead>(input: R) -> Result<FamilyLabels> {
    let mut out = FamilyLabels::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or("").trim();
        let family = fields.next().map(str::trim);
        let Some(family) = family else {
            return Err(Error::parse("labels", i + 1, 1, "expected two tab-separated fields"));
        };
        if id.is_empty() {
            return Err(Error::parse("labels", i + 1, 1, "empty sequence id"));
        }
        if family.is_empty() {
            return Err(Error::parse("labels", i + 1, id.len() + 2, "empty family label"));
        }
        if out.labels.insert(id.to_string(), family.to_string()).is_some() {
            out.duplicates += 1;
        }
    }
    Ok(out)
}

/// Copies labels onto records; returns how many records had no entry.
pub fn attach_labels(records: &mut [SequenceRecord], labels: &HashMap<String, String>) -> usize {
    let mut missing = 0;
    for r in records.iter_mut() {
        r.family = labels.get(&r.id).cloned();
        if r.family.is_none() {
            missing += 1;
        }
    }
    missing
}

/// Number of families per size range.
///
/// Families of exactly 10 sequences land in the first bucket so every family is counted once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SizeBuckets {
    pub up_to_10: usize,
    pub from_11_to_100: usize,
    pub from_101_to_1000: usize,
    pub over_1000: usize,
}

impl SizeBuckets {
    pub fn total(&self) -> usize {
        self.up_to_10 + self.from_11_to_100 + self.from_101_to_1000 + self.over_1000
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FamilyHistogram {
    pub counts: BTreeMap<String, usize>,
    pub unlabeled: usize,
    pub buckets: SizeBuckets,
}

pub fn family_histogram(records: &[SequenceRecord]) -> FamilyHistogram {
    let mut h = FamilyHistogram::default();
    for r in records {
        match &r.family {
            Some(f) => *h.counts.entry(f.clone()).or_default() += 1,
            None => h.unlabeled += 1,
        }
    }
    for &n in h.counts.values() {
        match n {
            0..=10 => h.buckets.up_to_10 += 1,
            11..=100 => h.buckets.from_11_to_100 += 1,
            101..=1000 => h.buckets.from_101_to_1000 += 1,
            _ => h.buckets.over_1000 += 1,
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn protein(s: &str) -> Result<Vec<SequenceRecord>> {
        parse_fasta(s.as_bytes(), &Alphabet::protein(), Policy::Strict)
    }

    #[test]
    fn multiline_dna_record() {
        let recs = parse_fasta(">s1 desc\nACG\nTTA\n".as_bytes(), &Alphabet::dna(), Policy::Strict).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, "s1");
        assert_eq!(recs[0].description, "desc");
        assert_eq!(recs[0].residues, "ACGTTA");
    }

    #[test]
    fn lowercase_is_normalized() {
        let recs = protein(">a\nMKV\n>b\nmkv\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.residues == "MKV"));
    }

    #[test]
    fn strict_reports_position() {
        match protein(">a\nMK1\n") {
            Err(Error::Parse {
                line, column, message, ..
            }) => {
                assert_eq!((line, column), (2, 3));
                assert!(message.contains("'1'"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replace_policy() {
        let recs = parse_fasta(">a\nMK*V\n".as_bytes(), &Alphabet::protein(), Policy::Replace).unwrap();
        assert_eq!(recs[0].residues, "MKXV");
        let dna = parse_fasta(">a\nACN\n".as_bytes(), &Alphabet::dna(), Policy::Replace);
        assert!(matches!(dna, Err(Error::Parse { line: 2, column: 3, .. })));
    }

    #[test]
    fn fasta_errors() {
        assert!(matches!(protein(""), Err(Error::Empty(_))));
        assert!(matches!(protein(">a\n>b\nMK\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(protein(">a\nMK\n>a\nMK\n"), Err(Error::DuplicateId(id)) if id == "a"));
        assert!(matches!(protein("MK\n>a\nMK\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(protein(">\nMK\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn crlf_and_blank_lines() {
        let recs = protein(">a x y\r\nMK\r\n\r\nVL\r\n").unwrap();
        assert_eq!(recs[0].residues, "MKVL");
        assert_eq!(recs[0].description, "x y");
    }

    #[test]
    fn writer_wraps_at_60() {
        let rec = SequenceRecord::new("s", &"A".repeat(130), &Alphabet::dna()).unwrap();
        let mut out = Vec::new();
        write_fasta(&[rec], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lens: Vec<_> = text.lines().map(str::len).collect();
        assert_eq!(lens, vec![2, 60, 60, 10]);
    }

    #[test]
    fn labels() {
        let l = load_family_labels("s1\tPF1\ns2\tPF2\n".as_bytes()).unwrap();
        assert_eq!(l.labels.len(), 2);
        assert_eq!(l.labels["s1"], "PF1");
        assert_eq!(l.labels["s2"], "PF2");
        assert_eq!(l.duplicates, 0);

        assert!(load_family_labels("".as_bytes()).unwrap().labels.is_empty());

        let l = load_family_labels("s1\tPF1\ns1\tPF9\n".as_bytes()).unwrap();
        assert_eq!(l.labels["s1"], "PF9");
        assert_eq!(l.duplicates, 1);

        let l = load_family_labels("# comment\ns1\tPF1\textra\n".as_bytes()).unwrap();
        assert_eq!(l.labels["s1"], "PF1");

        assert!(matches!(
            load_family_labels("s1\tPF1\ns2 PF2\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    fn labeled(n: usize, family: &str) -> Vec<SequenceRecord> {
        (0..n)
            .map(|i| {
                SequenceRecord::new(&format!("{family}_{i}"), "MK", &Alphabet::protein())
                    .unwrap()
                    .with_family(family)
            })
            .collect()
    }

    #[test]
    fn histogram() {
        let mut recs = labeled(3, "PF1");
        recs.extend(labeled(1, "PF2"));
        let h = family_histogram(&recs);
        assert_eq!(h.counts["PF1"], 3);
        assert_eq!(h.counts["PF2"], 1);
        assert_eq!(h.buckets.up_to_10, 2);

        assert!(family_histogram(&[]).counts.is_empty());

        let h = family_histogram(&labeled(1001, "big"));
        assert_eq!(h.buckets.over_1000, 1);
        let h = family_histogram(&labeled(1000, "edge"));
        assert_eq!(h.buckets.from_101_to_1000, 1);
        let h = family_histogram(&labeled(11, "edge"));
        assert_eq!(h.buckets.from_11_to_100, 1);
    }

    #[test]
    fn unlabeled_records_are_reported() {
        let mut recs = labeled(2, "PF1");
        recs.push(SequenceRecord::new("u", "MK", &Alphabet::protein()).unwrap());
        let h = family_histogram(&recs);
        assert_eq!(h.unlabeled, 1);
        assert_eq!(h.counts.values().sum::<usize>(), 2);
        assert_eq!(h.buckets.total(), h.counts.len());
    }
}
