from transformers import AutoTokenizer

from plm_embedder.parity import verify_tokenizer_parity


def test_single_word_identical(checkpoint_dir, vocab_txt):
    tokenizer = AutoTokenizer.from_pretrained(checkpoint_dir)
    report = verify_tokenizer_parity(vocab_txt, ["hello"], tokenizer)
    assert report.n_mismatched == 0


def test_ascii_corpus_low_mismatch(checkpoint_dir, vocab_txt):
    tokenizer = AutoTokenizer.from_pretrained(checkpoint_dir)
    texts = [
        "the cat sat on the mat",
        "hello , world !",
        "a big red bird and a small blue fish",
        "unaffable dogs running fast",
        "the old house , the new tree .",
        "sun and moon on the hill",
        "CATS AND DOGS",          # case folding
        "the  cat   sat",         # whitespace collapse
        "zzzqx unknown word",     # [UNK] on both sides
        "cafe cats !",
    ]
    report = verify_tokenizer_parity(vocab_txt, texts, tokenizer)
    assert report.mismatch_rate < 0.01, report.to_dict()


def test_accented_text_counts_as_divergence(checkpoint_dir, vocab_txt):
    # checkpoint tokenizers strip accents under lowercasing; the standalone
    # tokenizer does not, so this is an expected divergence class
    tokenizer = AutoTokenizer.from_pretrained(checkpoint_dir)
    report = verify_tokenizer_parity(vocab_txt, ["café cats"], tokenizer)
    assert report.n_mismatched == 1
    assert report.first_divergence is not None
    assert report.first_divergence.checkpoint[0] == "cafe"


def test_empty_text_agrees(checkpoint_dir, vocab_txt):
    tokenizer = AutoTokenizer.from_pretrained(checkpoint_dir)
    report = verify_tokenizer_parity(vocab_txt, [""], tokenizer)
    assert report.n_mismatched == 0
