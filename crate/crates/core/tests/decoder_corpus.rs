use std::collections::BTreeMap;

use sdvkit::isa::{decode_word, encode, parse_instruction, Mnemonic};

const CORPUS: &str = include_str!("fixtures/decoder_corpus.txt");

#[test]
fn decoder_agrees_with_reference_assembler() {
    let mut per_mnemonic: BTreeMap<&str, usize> = BTreeMap::new();
    for line in CORPUS.lines().filter(|l| !l.starts_with('#')) {
        let (hex, text) = line.split_once('\t').unwrap();
        let word = u32::from_str_radix(hex, 16).unwrap();
        let parsed = parse_instruction(text).unwrap_or_else(|e| panic!("{text}: {e}"));
        let decoded = decode_word(word).unwrap_or_else(|e| panic!("{hex}: {e}"));
        assert_eq!(decoded, parsed, "{hex} {text}");
        assert_eq!(encode(&parsed), word, "{text}");
        *per_mnemonic.entry(parsed.mnemonic().as_str()).or_default() += 1;
    }
    assert_eq!(per_mnemonic.len(), Mnemonic::ALL.len());
    assert!(per_mnemonic.values().all(|n| *n == 50));
}
