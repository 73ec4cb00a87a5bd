//! Local-alignment retrieval: score-only affine-gap Smith-Waterman and top-k search.
//!
//! A gap of length `L` scores `gap_open + (L - 1) * gap_extend`.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::{majority_vote, rank_top_k, NeighborResult, ScoreKind};
use crate::sequences::SequenceRecord;

const BLOSUM62: &str = "\
#  Matrix made by matblas from blosum62.iij
   A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V  B  Z  X  *
A  4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0 -2 -1  0 -4
R -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3 -1  0 -1 -4
N -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3  3  0 -1 -4
D -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3  4  1 -1 -4
C  0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1 -3 -3 -2 -4
Q -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2  0  3 -1 -4
E -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4
G  0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3 -1 -2 -1 -4
H -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3  0  0 -1 -4
I -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3 -3 -3 -1 -4
L -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1 -4 -3 -1 -4
K -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2  0  1 -1 -4
M -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1 -3 -1 -1 -4
F -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1 -3 -3 -1 -4
P -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2 -2 -1 -2 -4
S  1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2  0  0  0 -4
T  0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0 -1 -1  0 -4
W -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3 -4 -3 -2 -4
Y -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1 -3 -2 -1 -4
V  0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4 -3 -2 -1 -4
B -2 -1  3  4 -3  0  1 -1  0 -3 -4  0 -3 -3 -2  0 -1 -4 -3 -3  4  1 -1 -4
Z -1  0  0  1 -3  3  4 -2  0 -3 -3  1 -1 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4
X  0 -1 -1 -1 -2 -1 -1 -1 -1 -1 -1 -1 -1 -1 -2  0  0 -2 -1 -1 -1 -1 -1 -4
* -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4  1
";

/// Integer scores indexed by upper-case letter. Letters absent from the source table
/// are undefined and rejected at alignment time.
#[derive(Clone, PartialEq, Eq)]
pub struct SubstitutionMatrix {
    name: String,
    scores: [[i32; 26]; 26],
    defined: [bool; 26],
}

impl fmt::Debug for SubstitutionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters: String = (0..26u8)
            .filter(|&i| self.defined[i as usize])
            .map(|i| (b'A' + i) as char)
            .collect();
        f.debug_struct("SubstitutionMatrix")
            .field("name", &self.name)
            .field("letters", &letters)
            .finish()
    }
}

fn letter_index(c: u8) -> Option<usize> {
    let c = c.to_ascii_uppercase();
    c.is_ascii_uppercase().then(|| (c - b'A') as usize)
}

impl SubstitutionMatrix {
    /// BLOSUM62. `J`, `O` and `U` score like `X`.
    pub fn blosum62() -> Self {
        let mut m = Self::from_ncbi_text("blosum62", BLOSUM62).expect("embedded table parses");
        let x = letter_index(b'X').unwrap();
        for extra in *b"JOU" {
            let e = letter_index(extra).unwrap();
            for j in 0..26 {
                m.scores[e][j] = m.scores[x][j];
                m.scores[j][e] = m.scores[j][x];
            }
            m.defined[e] = true;
        }
        for extra in *b"JOU" {
            let e = letter_index(extra).unwrap();
            for other in *b"JOUX" {
                m.scores[e][letter_index(other).unwrap()] = m.scores[x][x];
            }
        }
        m
    }

    /// `matched` on the diagonal and `mismatched` elsewhere, for all 26 letters.
    pub fn uniform(matched: i32, mismatched: i32) -> Self {
        let mut scores = [[mismatched; 26]; 26];
        for (i, row) in scores.iter_mut().enumerate() {
            row[i] = matched;
        }
        SubstitutionMatrix {
            name: format!("uniform({matched},{mismatched})"),
            scores,
            defined: [true; 26],
        }
    }

    /// Parses an NCBI-style table: `#` comments, a header row of symbols, then one row
    /// per symbol starting with that symbol. Non-letter symbols such as `*` are read
    /// and ignored.
    pub fn from_ncbi_text(name: &str, text: &str) -> Result<Self> {
        const SRC: &str = "substitution matrix";
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or(Error::Empty(SRC))?;
        let columns: Vec<u8> = header
            .split_whitespace()
            .map(|s| match s.as_bytes() {
                [c] => Ok(*c),
                _ => Err(Error::parse(SRC, 1, 1, format!("bad column symbol {s:?}"))),
            })
            .collect::<Result<_>>()?;
        let mut scores = [[0; 26]; 26];
        let mut defined = [false; 26];
        let mut seen_rows = Vec::new();
        for (line_no, line) in lines {
            let mut fields = line.split_whitespace();
            let symbol = fields.next().unwrap();
            let &[row_symbol] = symbol.as_bytes() else {
                return Err(Error::parse(SRC, line_no, 1, format!("bad row symbol {symbol:?}")));
            };
            let values: Vec<i32> = fields
                .map(|f| {
                    f.parse()
                        .map_err(|_| Error::parse(SRC, line_no, 1, format!("bad score {f:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != columns.len() {
                return Err(Error::parse(
                    SRC,
                    line_no,
                    1,
                    format!("expected {} scores, found {}", columns.len(), values.len()),
                ));
            }
            seen_rows.push(row_symbol);
            let Some(r) = letter_index(row_symbol) else { continue };
            defined[r] = true;
            for (&col, &v) in columns.iter().zip(&values) {
                if let Some(c) = letter_index(col) {
                    scores[r][c] = v;
                }
            }
        }
        for &col in &columns {
            if !seen_rows.contains(&col) {
                return Err(Error::parse(SRC, 1, 1, format!("column {:?} has no row", col as char)));
            }
        }
        Ok(SubstitutionMatrix {
            name: name.to_string(),
            scores,
            defined,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Score for two letters (case-insensitive). Panics on non-letters.
    pub fn score(&self, a: u8, b: u8) -> i32 {
        self.scores[letter_index(a).unwrap()][letter_index(b).unwrap()]
    }

    pub fn defines(&self, c: u8) -> bool {
        letter_index(c).is_some_and(|i| self.defined[i])
    }

    pub fn is_symmetric(&self) -> bool {
        (0..26)
            .all(|i| (0..26).all(|j| !(self.defined[i] && self.defined[j]) || self.scores[i][j] == self.scores[j][i]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignParams {
    pub matrix: SubstitutionMatrix,
    pub gap_open: i32,
    pub gap_extend: i32,
}

impl Default for AlignParams {
    /// BLOSUM62 with open −11, extend −1.
    fn default() -> Self {
        AlignParams {
            matrix: SubstitutionMatrix::blosum62(),
            gap_open: -11,
            gap_extend: -1,
        }
    }
}

impl AlignParams {
    pub fn new(matrix: SubstitutionMatrix, gap_open: i32, gap_extend: i32) -> Result<Self> {
        let p = AlignParams {
            matrix,
            gap_open,
            gap_extend,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.matrix.is_symmetric() {
            return Err(Error::InvalidConfig(format!(
                "substitution matrix {} is not symmetric",
                self.matrix.name
            )));
        }
        if !(self.gap_open <= self.gap_extend && self.gap_extend <= 0) {
            return Err(Error::InvalidConfig(format!(
                "gap penalties must satisfy open <= extend <= 0 (got open {}, extend {})",
                self.gap_open, self.gap_extend
            )));
        }
        Ok(())
    }

    fn encode(&self, residues: &str) -> Result<Vec<u8>> {
        if residues.is_empty() {
            return Err(Error::Empty("alignment sequence"));
        }
        residues
            .bytes()
            .map(|c| match letter_index(c) {
                Some(i) if self.matrix.defined[i] => Ok(i as u8),
                _ => Err(Error::InvalidConfig(format!(
                    "residue {:?} is not scored by {}",
                    c as char, self.matrix.name
                ))),
            })
            .collect()
    }
}

const NEG_INF: i32 = i32::MIN / 4;

/// Best local alignment score (Gotoh recurrences, floored at 0), in memory linear in
/// the shorter sequence.
pub fn smith_waterman(a: &str, b: &str, p: &AlignParams) -> Result<i32> {
    let (a, b) = (p.encode(a)?, p.encode(b)?);
    let (rows, cols) = if a.len() >= b.len() { (&a, &b) } else { (&b, &a) };
    Ok(gotoh(rows, cols, p))
}

fn gotoh(rows: &[u8], cols: &[u8], p: &AlignParams) -> i32 {
    let (open, extend) = (p.gap_open, p.gap_extend);
    // h[j], f[j]: previous row's best and vertical-gap scores at column j
    let mut h = vec![0i32; cols.len() + 1];
    let mut f = vec![NEG_INF; cols.len() + 1];
    let mut best = 0;
    for &ra in rows {
        let sub = &p.matrix.scores[ra as usize];
        let mut diag = 0; // h[i-1][j-1]
        let mut left = 0; // h[i][j-1]
        let mut e = NEG_INF;
        for j in 1..=cols.len() {
            e = (left + open).max(e + extend);
            f[j] = (h[j] + open).max(f[j] + extend);
            let cell = (diag + sub[cols[j - 1] as usize]).max(e).max(f[j]).max(0);
            diag = h[j];
            h[j] = cell;
            left = cell;
            best = best.max(cell);
        }
    }
    best
}

/// Scores `query` against every record (except one with the query's id) and returns the
/// `k` best, highest score first, ties by smaller id.
pub fn align_topk(
    db: &[SequenceRecord],
    query: &SequenceRecord,
    k: usize,
    p: &AlignParams,
) -> Result<Vec<NeighborResult>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    p.validate()?;
    let q = p.encode(&query.residues)?;
    let candidates = db
        .par_iter()
        .filter(|r| r.id != query.id)
        .map(|r| {
            let t = p.encode(&r.residues)?;
            let score = if q.len() >= t.len() {
                gotoh(&q, &t, p)
            } else {
                gotoh(&t, &q, p)
            };
            Ok((f64::from(score), r.id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    if candidates.is_empty() {
        return Err(Error::Empty("alignment database"));
    }
    Ok(rank_top_k(candidates, k, ScoreKind::Similarity))
}

/// Majority family among the top-`k` alignment hits; ties go to the larger summed score.
pub fn align_classify(
    db: &[SequenceRecord],
    labels: &HashMap<String, String>,
    query: &SequenceRecord,
    k: usize,
    p: &AlignParams,
) -> Result<String> {
    let hits = align_topk(db, query, k, p)?;
    majority_vote(&hits, labels, ScoreKind::Similarity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix local alignment that tries every gap length explicitly (cubic time).
    fn reference_score(a: &[u8], b: &[u8], p: &AlignParams) -> i32 {
        let gap = |len: usize| p.gap_open + (len as i32 - 1) * p.gap_extend;
        let mut h = vec![vec![0i32; b.len() + 1]; a.len() + 1];
        let mut best = 0;
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let mut v = h[i - 1][j - 1] + p.matrix.score(a[i - 1], b[j - 1]);
                for len in 1..=i {
                    v = v.max(h[i - len][j] + gap(len));
                }
                for len in 1..=j {
                    v = v.max(h[i][j - len] + gap(len));
                }
                h[i][j] = v.max(0);
                best = best.max(h[i][j]);
            }
        }
        best
    }

    fn uniform_params() -> AlignParams {
        AlignParams::new(SubstitutionMatrix::uniform(2, -1), -2, -1).unwrap()
    }

    // BLOSUM50 restricted to the letters of the classic HEAGAWGHEE / PAWHEAE example.
    const BLOSUM50_PART: &str = "
   A  E  G  H  P  W
A  5 -1  0 -2 -1 -3
E -1  6 -3  0 -1 -3
G  0 -3  8 -2 -2 -3
H -2  0 -2 10 -2 -3
P -1 -1 -2 -2 10 -4
W -3 -3 -3 -3 -4 15
";

    #[test]
    fn simple_scores() {
        let p = uniform_params();
        assert_eq!(smith_waterman("ACG", "ACG", &p).unwrap(), 6);
        assert_eq!(smith_waterman("AAAA", "CCCC", &p).unwrap(), 0);
        assert!(matches!(smith_waterman("", "ACG", &p), Err(Error::Empty(_))));
    }

    #[test]
    fn classic_example() {
        let m = SubstitutionMatrix::from_ncbi_text("blosum50-part", BLOSUM50_PART).unwrap();
        // linear gaps of 8 give the textbook local score of 28 (AWGHE over AW-HE)
        let linear = AlignParams::new(m.clone(), -8, -8).unwrap();
        assert_eq!(smith_waterman("HEAGAWGHEE", "PAWHEAE", &linear).unwrap(), 28);
        let affine = AlignParams::new(m, -10, -1).unwrap();
        let expected = reference_score(b"HEAGAWGHEE", b"PAWHEAE", &affine);
        assert_eq!(expected, 5 + 15 - 10 + 10 + 6);
        assert_eq!(smith_waterman("HEAGAWGHEE", "PAWHEAE", &affine).unwrap(), expected);
        assert!(smith_waterman("HEAGAWGHEEK", "PAWHEAE", &affine).is_err());
    }

    #[test]
    fn blosum62_shape() {
        let m = SubstitutionMatrix::blosum62();
        assert!(m.is_symmetric());
        assert_eq!(m.score(b'W', b'W'), 11);
        assert_eq!(m.score(b'C', b'C'), 9);
        assert_eq!(m.score(b'A', b'R'), -1);
        assert_eq!(m.score(b'u', b'A'), m.score(b'X', b'A'));
        let standard = b"ACDEFGHIKLMNPQRSTVWY";
        for &r in standard {
            let diag = m.score(r, r);
            for &c in standard {
                assert!(diag >= m.score(r, c), "{} row", r as char);
            }
        }
        let letters = (b'A'..=b'Z').filter(|&c| m.defines(c)).count();
        assert_eq!(letters, 26);
    }

    #[test]
    fn matrix_parse_errors() {
        assert!(SubstitutionMatrix::from_ncbi_text("x", "").is_err());
        assert!(SubstitutionMatrix::from_ncbi_text("x", " A C\nA 1 0\n").is_err());
        assert!(SubstitutionMatrix::from_ncbi_text("x", " A C\nA 1 0\nC 0 x\n").is_err());
        let asym = SubstitutionMatrix::from_ncbi_text("x", " A C\nA 1 0\nC 2 1\n").unwrap();
        assert!(AlignParams::new(asym, -2, -1).is_err());
        assert!(AlignParams::new(SubstitutionMatrix::uniform(1, -1), -1, -2).is_err());
        assert!(AlignParams::new(SubstitutionMatrix::uniform(1, -1), -1, 1).is_err());
    }

    fn dna(max: usize) -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(b"ACGT".to_vec()), 1..=max)
            .prop_map(|v| String::from_utf8(v).unwrap())
    }

    proptest! {
        #[test]
        fn gotoh_matches_reference(a in dna(12), b in dna(12), open in -6i32..=0, ext_gap in 0i32..=6) {
            let extend = (open + ext_gap).min(0);
            let p = AlignParams::new(SubstitutionMatrix::uniform(2, -1), open, extend).unwrap();
            prop_assert_eq!(smith_waterman(&a, &b, &p).unwrap(), reference_score(a.as_bytes(), b.as_bytes(), &p));
        }

        #[test]
        fn appending_never_lowers_the_score(a in dna(15), b in dna(15), x in dna(5), y in dna(5)) {
            let p = uniform_params();
            let base = smith_waterman(&a, &b, &p).unwrap();
            prop_assert!(smith_waterman(&(a + &x), &(b + &y), &p).unwrap() >= base);
        }
    }

    fn rec(id: &str, residues: &str) -> SequenceRecord {
        SequenceRecord {
            id: id.into(),
            description: String::new(),
            residues: residues.into(),
            family: None,
        }
    }

    #[test]
    fn topk_examples() {
        let p = AlignParams::default();
        let query = rec("q", "MKVLAAGIVG");
        let db = vec![
            rec("q", "MKVLAAGIVG"),
            rec("copy", "MKVLAAGIVG"),
            rec("b", "WWWWWWWW"),
            rec("a", "WWWWWWWW"),
            rec("far", "MKVLPPGIVG"),
        ];
        let hits = align_topk(&db, &query, 10, &p).unwrap();
        assert_eq!(hits.len(), 4);
        assert_eq!(hits[0].id, "copy");
        assert_eq!(
            hits[0].score,
            f64::from(smith_waterman(&query.residues, &query.residues, &p).unwrap())
        );
        assert_eq!(hits[1].id, "far");
        assert_eq!((hits[2].id.as_str(), hits[3].id.as_str()), ("a", "b"));
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(align_topk(&[], &query, 1, &p).is_err());
        assert!(align_topk(&db[..1], &query, 1, &p).is_err());
    }

    #[test]
    fn classify_by_alignment() {
        let p = AlignParams::default();
        let db = vec![rec("a", "MKVLAAGIVG"), rec("b", "MKVLAAGIVA"), rec("c", "WWHHWWHH")];
        let labels: HashMap<String, String> = [("a", "F1"), ("b", "F1"), ("c", "F2")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(
            align_classify(&db, &labels, &rec("q", "MKVLAAGIVG"), 3, &p).unwrap(),
            "F1"
        );
        assert_eq!(
            align_classify(&db, &labels, &rec("q", "WWHHWWHH"), 1, &p).unwrap(),
            "F2"
        );
        assert!(align_classify(&[], &labels, &rec("q", "MKV"), 3, &p).is_err());
    }
}
