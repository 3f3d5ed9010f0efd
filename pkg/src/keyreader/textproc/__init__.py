from .keywords import (PRESERVED, CorpusStats, KeywordStats, keywordify, keywordify_examples, load_stopwords,
                       tfidf_scores)
from .skipgram import ConfigurationError, skipgram_pairs, train_skipgram, train_tag_embeddings
from .squad import Answer, Example, read_dataset, write_dataset
from .tagging import (
    NER_TAGS,
    POS_TAGS,
    GazetteerNERTagger,
    RulePOSTagger,
    exact_match_features,
    match_bits,
    suffix_lemma,
    tag_tokens,
)
from .tokens import Token, is_punct, tokenize, words
from .vocab import EOS, EOS_ID, PAD, PAD_ID, UNK, UNK_ID, EmbeddingParseError, Vocabulary, load_embeddings

__all__ = [
    "PRESERVED", "CorpusStats", "KeywordStats", "keywordify", "keywordify_examples", "load_stopwords", "tfidf_scores",
    "ConfigurationError", "skipgram_pairs", "train_skipgram", "train_tag_embeddings",
    "Answer", "Example", "read_dataset", "write_dataset",
    "NER_TAGS", "POS_TAGS", "GazetteerNERTagger", "RulePOSTagger", "exact_match_features",
    "match_bits", "suffix_lemma", "tag_tokens",
    "Token", "is_punct", "tokenize", "words",
    "EOS", "EOS_ID", "PAD", "PAD_ID", "UNK", "UNK_ID", "EmbeddingParseError", "Vocabulary", "load_embeddings",
]
