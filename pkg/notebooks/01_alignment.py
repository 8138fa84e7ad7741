# %% [markdown]
# # Edit extraction
#
# A correction is a list of edits: source span `[start, end)` replaced by some
# target tokens. We get them from a minimum-cost Levenshtein alignment, then merge
# every run of non-matching steps into one edit.

# %%
from gecforge import CHAR, Granularity, align_tokens, apply_edits, diff_texts, extract_edits, tokenize

# %% [markdown]
# ## Character level (the default for Chinese)

# %%
src, tgt = "我昨天去了图书馆看书了很多", "我昨天去图书馆看了很多书"
edits = diff_texts(src, tgt)
for e in edits:
    print(e.kind, (e.start, e.end), "".join(e.replacement))

# %%
# edits always reproduce the target
assert "".join(apply_edits(list(src), edits)) == tgt

# %% [markdown]
# ## Raw operations
#
# Ties between equally cheap alignments are broken the same way every time, so
# the same pair always yields the same edits.

# %%
print(align_tokens(list("kitten"), list("sitting")))
print(extract_edits(list("ab"), list("c")).edits)

# %% [markdown]
# ## Word level
#
# Whitespace tokenization is the fallback. Chinese text needs a segmenter
# registered under a name (see `register_segmenter`).

# %%
word = Granularity.word()
print(tokenize("she go to school yesterday", word))
for e in diff_texts("she go to school yesterday", "she went to school yesterday", word):
    print(e.to_json())
