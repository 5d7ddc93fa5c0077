//! BLOSUM62 over the 25-symbol alphabet.
//!
//! The 24 standard NCBI rows are used verbatim. Selenocysteine `U` has no
//! row in the NCBI table; it is scored like the wildcard `X`.

use std::sync::LazyLock;

use crate::alphabet::{ALPHABET, ALPHABET_SIZE};

/// Byte-exact text form of the embedded table. Rows and columns follow
/// [`ALPHABET`]; fields are right-aligned in width 3.
pub const BLOSUM62_TEXT: &str = "    A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V  B  Z  X  U  *
A   4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0 -2 -1  0  0 -4
R  -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3 -1  0 -1 -1 -4
N  -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3  3  0 -1 -1 -4
D  -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3  4  1 -1 -1 -4
C   0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1 -3 -3 -2 -2 -4
Q  -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2  0  3 -1 -1 -4
E  -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2  1  4 -1 -1 -4
G   0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3 -1 -2 -1 -1 -4
H  -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3  0  0 -1 -1 -4
I  -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3 -3 -3 -1 -1 -4
L  -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1 -4 -3 -1 -1 -4
K  -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2  0  1 -1 -1 -4
M  -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1 -3 -1 -1 -1 -4
F  -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1 -3 -3 -1 -1 -4
P  -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2 -2 -1 -2 -2 -4
S   1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2  0  0  0  0 -4
T   0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0 -1 -1  0  0 -4
W  -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3 -4 -3 -2 -2 -4
Y  -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1 -3 -2 -1 -1 -4
V   0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4 -3 -2 -1 -1 -4
B  -2 -1  3  4 -3  0  1 -1  0 -3 -4  0 -3 -3 -2  0 -1 -4 -3 -3  4  1 -1 -1 -4
Z  -1  0  0  1 -3  3  4 -2  0 -3 -3  1 -1 -3 -1  0 -1 -3 -2 -2  1  4 -1 -1 -4
X   0 -1 -1 -1 -2 -1 -1 -1 -1 -1 -1 -1 -1 -1 -2  0  0 -2 -1 -1 -1 -1 -1 -1 -4
U   0 -1 -1 -1 -2 -1 -1 -1 -1 -1 -1 -1 -1 -1 -2  0  0 -2 -1 -1 -1 -1 -1 -1 -4
*  -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4  1
";

/// A symmetric substitution table indexed by alphabet codes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionMatrix {
    scores: [[i8; ALPHABET_SIZE]; ALPHABET_SIZE],
}

impl SubstitutionMatrix {
    pub fn from_scores(scores: [[i8; ALPHABET_SIZE]; ALPHABET_SIZE]) -> Self {
        SubstitutionMatrix { scores }
    }

    /// Parses the format produced by [`SubstitutionMatrix::dump`].
    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next()?.split_whitespace().collect();
        if header.len() != ALPHABET_SIZE || header.iter().zip(ALPHABET).any(|(h, &a)| h.as_bytes() != [a]) {
            return None;
        }
        let mut scores = [[0i8; ALPHABET_SIZE]; ALPHABET_SIZE];
        for (row, &sym) in scores.iter_mut().zip(ALPHABET) {
            let mut fields = lines.next()?.split_whitespace();
            if fields.next()?.as_bytes() != [sym] {
                return None;
            }
            for slot in row.iter_mut() {
                *slot = fields.next()?.parse().ok()?;
            }
        }
        Some(SubstitutionMatrix { scores })
    }

    pub fn dump(&self) -> String {
        let mut out = String::from("  ");
        for &a in ALPHABET {
            out.push_str(&format!("{:>3}", a as char));
        }
        out.push('\n');
        for (row, &a) in self.scores.iter().zip(ALPHABET) {
            out.push(a as char);
            out.push(' ');
            for s in row {
                out.push_str(&format!("{s:>3}"));
            }
            out.push('\n');
        }
        out
    }

    #[inline(always)]
    pub fn score(&self, a: u8, b: u8) -> i32 {
        self.scores[a as usize][b as usize] as i32
    }

    pub fn row(&self, a: u8) -> &[i8; ALPHABET_SIZE] {
        &self.scores[a as usize]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..ALPHABET_SIZE).all(|i| (0..ALPHABET_SIZE).all(|j| self.scores[i][j] == self.scores[j][i]))
    }
}

static BLOSUM62: LazyLock<SubstitutionMatrix> =
    LazyLock::new(|| SubstitutionMatrix::parse(BLOSUM62_TEXT).expect("embedded BLOSUM62 table parses"));

pub fn blosum62() -> &'static SubstitutionMatrix {
    &BLOSUM62
}
