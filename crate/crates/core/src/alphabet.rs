//! The 25-symbol protein alphabet shared by k-mer encoding and alignment scoring.
//!
//! Symbols are the 20 standard amino acids in BLOSUM row order, the ambiguity
//! codes B, Z and X, selenocysteine U, and the stop symbol `*`. With `k = 6`
//! the k-mer code space is `25^6 = 244_140_625`.

pub const ALPHABET: &[u8; 25] = b"ARNDCQEGHILKMFPSTWYVBZXU*";
pub const ALPHABET_SIZE: usize = ALPHABET.len();

/// Code of the wildcard `X`, the target for unrecognised input bytes.
pub const WILDCARD: u8 = 22;

const INVALID: u8 = 0xff;

static CODES: [u8; 256] = {
    let mut table = [INVALID; 256];
    let mut i = 0;
    while i < ALPHABET.len() {
        let sym = ALPHABET[i];
        table[sym as usize] = i as u8;
        if sym.is_ascii_uppercase() {
            table[sym.to_ascii_lowercase() as usize] = i as u8;
        }
        i += 1;
    }
    table
};

/// Alphabet code of `byte` (case-insensitive), or `None` if it is not a symbol.
#[inline]
pub fn code_of(byte: u8) -> Option<u8> {
    match CODES[byte as usize] {
        INVALID => None,
        c => Some(c),
    }
}

#[inline]
pub fn symbol_of(code: u8) -> u8 {
    ALPHABET[code as usize]
}

/// Encodes upper-cased residues to alphabet codes. Callers are expected to
/// have normalised the sequence through `seqio`; stray bytes become `X`.
pub fn encode_residues(residues: &[u8]) -> Vec<u8> {
    residues
        .iter()
        .map(|&b| code_of(b).unwrap_or(WILDCARD))
        .collect()
}
