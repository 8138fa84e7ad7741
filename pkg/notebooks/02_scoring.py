# %% [markdown]
# # Exact-match scoring
#
# Predicted edits are compared against gold edits by exact span and content.
# With several references, each sentence uses the one giving it the best F, and
# counts are summed over the corpus before computing P, R and F0.5.

# %%
from gecforge import CorrectionSample, Prediction, compute_f_beta, score_corpus
from gecforge.metrics import format_table

# %%
corpus = [
    CorrectionSample("1", "abcdef", ("abcdez", "axcdez", "axcyef")),
    CorrectionSample("2", "他很高兴的说", ("他很高兴地说",)),
    CorrectionSample("3", "今天天气很好", ()),
]
preds = [Prediction("1", "axcyef"), Prediction("2", "他很高兴地说吧"), Prediction("3", "今天天气很好")]

report = score_corpus(preds, corpus)
for row in report.per_sentence:
    print(row)

# %%
print(format_table([("toy system", report)]))

# %% [markdown]
# ## Precision-weighted F
#
# beta = 0.5 rewards precision over recall: a cautious system that makes few
# but correct edits scores better than an eager one with the same F1.

# %%
print(round(compute_f_beta(0.5382, 0.3014), 4))
print(round(compute_f_beta(0.3014, 0.5382), 4))
print(round(compute_f_beta(0.5382, 0.3014, beta=1.0), 4))
