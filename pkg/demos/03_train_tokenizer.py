"""
Byte-pair encoding from the training text itself
================================================

The tokenizer is learned from whatever corpus the model will train on:
start from characters, repeatedly merge the most frequent adjacent
pair.  Words after the first on a line carry a leading '▁' marker so
word boundaries survive the merges.
"""

from quantal.bpe import decode, encode, train_tokenizer
from quantal.corpora import gen_exp2_corpus

corpus = gen_exp2_corpus(n_strings=200, exception_prop=0.3, string_len=16, seed=11)
tok = train_tokenizer([corpus.to_text()], target_vocab_size=32)

print(f"vocabulary: {tok.vocab_size} tokens "
      f"(ids 0-2 are pad/unk/mask), {len(tok.merges)} merges")
print("first merges:", tok.merges[:6])
print()

# Frequent digit runs become single tokens, so encoded lengths vary.
for text in (corpus.sentences[0].text, corpus.sentences[1].text):
    ids = encode(tok, text)
    pieces = [tok.id_to_token[i] for i in ids]
    print(f"  {text}")
    print(f"  -> {len(ids)} tokens: {' '.join(pieces)}")
    assert decode(tok, ids) == text  # encoding is lossless
    print()

# Merges are frequency-driven, so strings matching the majority pattern
# tend to compress better than rare ones.  Evaluation scores sum over
# token positions; this length asymmetry is visible to them, which is
# worth remembering when reading accuracies of untrained models.
rule_lens = []
exc_lens = []
for s in corpus.sentences:
    (exc_lens if s.is_exception else rule_lens).append(len(encode(tok, s.text)))
print(f"mean encoded length, rule strings:      {sum(rule_lens) / len(rule_lens):.2f}")
print(f"mean encoded length, exception strings: {sum(exc_lens) / len(exc_lens):.2f}")
