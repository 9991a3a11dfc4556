"""
Two artificial languages with a controllable exception rate
===========================================================

Both experiments train on corpora where a target rule holds for a
chosen fraction of sentences and a fixed competing pattern holds for
the rest.

Word-order language: sentences are ``a b c <permutation> .`` over nonce
words; the rule repeats the first three words in BAC order, exceptions
use ACB.

Binary-string language: fixed-length 0/1 strings; the rule says strings
start with '1', exceptions start with '0'.
"""

from quantal.corpora import (
    classify_shift_sentence,
    gen_exp1_corpus,
    gen_exp1_test_pairs,
    gen_exp2_corpus,
    gen_exp2_test_pairs,
    gen_vocabulary,
)

# --- word-order language ------------------------------------------------
# The vocabulary is split in half: training sentences draw from the
# first half, test pairs from the second, so evaluation is over words
# the model has never seen in any order.
vocab = gen_vocabulary(16, min_len=3, max_len=8, seed=5)
print("train words:", " ".join(vocab.train_words))
print("test words: ", " ".join(vocab.test_words))
print()

corpus = gen_exp1_corpus(vocab, n_sentences=12, exception_prop=0.25, seed=5)
print(f"{corpus.exception_count} of {len(corpus.sentences)} sentences are exceptions:")
for s in corpus.sentences:
    print(f"  [{classify_shift_sentence(s.tokens)}] {s.text}")
print()

pairs = gen_exp1_test_pairs(vocab, n_pairs=3, seed=9)
print("test pairs (rule member first):")
for rule, foil in pairs.pairs:
    print(f"  {rule.text}")
    print(f"  {foil.text}")
    print()

# --- binary-string language --------------------------------------------
corpus2 = gen_exp2_corpus(n_strings=10, exception_prop=0.2, string_len=16, seed=3)
print(f"{corpus2.exception_count} of {len(corpus2.sentences)} strings are exceptions:")
for s in corpus2.sentences:
    marker = "exception" if s.is_exception else "rule     "
    print(f"  [{marker}] {s.text}")
print()

# Each test pair shares its last 15 digits; only the first digit differs.
pairs2 = gen_exp2_test_pairs(n_pairs=2, string_len=16, seed=3)
for rule, foil in pairs2.pairs:
    print(f"  rule: {rule.text}")
    print(f"  foil: {foil.text}")
    print()
