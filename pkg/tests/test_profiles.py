import numpy as np

from tweetprof.corpus import Tweet, UserTimeline
from tweetprof.profiles import (
    ProfileMode,
    feature_matrix,
    feature_matrix_tsv,
    featurize,
    timeline_vector,
    tweet_vector,
)
from tweetprof.text import Vocabulary, average_embedding, tokenize

VOCAB = Vocabulary({"<unk>": 0, "<pad>": 1, "a": 2, "b": 3})
EMB = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class TestTweetVector:
    def test_mean_of_rows(self):
        tweet = Tweet("1", "u1", "a b", 0)
        np.testing.assert_allclose(tweet_vector(tweet, VOCAB, EMB), [0.5, 0.5])

    def test_empty_text_zero(self):
        tweet = Tweet("1", "u1", "", 0)
        np.testing.assert_allclose(tweet_vector(tweet, VOCAB, EMB), [0.0, 0.0])

    def test_equals_average_embedding(self):
        tweet = Tweet("1", "u1", "b a a", 0)
        np.testing.assert_array_equal(
            tweet_vector(tweet, VOCAB, EMB),
            average_embedding(tokenize("b a a"), VOCAB, EMB),
        )


class TestTimelineVector:
    def test_token_pool_weighting(self):
        # ["a"], ["b","b"]: pooled tokens a,b,b -> (1/3, 2/3)
        tl = UserTimeline("u1", ("a", "b b"))
        np.testing.assert_allclose(timeline_vector(tl, VOCAB, EMB), [1 / 3, 2 / 3])

    def test_identical_single_token_tweets(self):
        tl = UserTimeline("u1", ("a", "a", "a"))
        np.testing.assert_allclose(timeline_vector(tl, VOCAB, EMB), [1.0, 0.0])

    def test_absent_timeline_zero(self):
        np.testing.assert_allclose(timeline_vector(None, VOCAB, EMB), [0.0, 0.0])

    def test_invariant_to_token_order_within_tweet(self):
        a = timeline_vector(UserTimeline("u", ("a b", "b")), VOCAB, EMB)
        b = timeline_vector(UserTimeline("u", ("b a", "b")), VOCAB, EMB)
        np.testing.assert_array_equal(a, b)

    def test_not_invariant_to_redistribution(self):
        # token-pool weighting: ["a","b"],["b"] pools {a,b,b}; ["a"],["b"] pools {a,b}
        a = timeline_vector(UserTimeline("u", ("a b", "b")), VOCAB, EMB)
        b = timeline_vector(UserTimeline("u", ("a", "b")), VOCAB, EMB)
        assert not np.allclose(a, b)


class TestFeaturize:
    timelines = {"u1": UserTimeline("u1", ("b",))}

    def test_baseline_length_d(self):
        tweet = Tweet("1", "u1", "a", 0)
        vec = featurize(tweet, self.timelines, ProfileMode.BASELINE, VOCAB, EMB)
        assert vec.shape == (2,)
        np.testing.assert_array_equal(vec, tweet_vector(tweet, VOCAB, EMB))

    def test_timeline_length_2d_tweet_first(self):
        tweet = Tweet("1", "u1", "a", 0)
        vec = featurize(tweet, self.timelines, ProfileMode.TIMELINE, VOCAB, EMB)
        assert vec.shape == (4,)
        np.testing.assert_allclose(vec, [1.0, 0.0, 0.0, 1.0])

    def test_missing_author_zero_second_half(self):
        tweet = Tweet("1", "stranger", "a", 0)
        vec = featurize(tweet, self.timelines, ProfileMode.TIMELINE, VOCAB, EMB)
        np.testing.assert_allclose(vec[2:], [0.0, 0.0])

    def test_first_half_equals_baseline(self):
        for text in ("a", "b a", ""):
            tweet = Tweet("1", "u1", text, 0)
            full = featurize(tweet, self.timelines, ProfileMode.TIMELINE, VOCAB, EMB)
            base = featurize(tweet, self.timelines, ProfileMode.BASELINE, VOCAB, EMB)
            np.testing.assert_array_equal(full[:2], base)

    def test_outputs_finite(self):
        tweets = [Tweet(str(i), "u1", t, 0) for i, t in enumerate(["a b", "", "zzz unknown"])]
        mat = feature_matrix(tweets, self.timelines, ProfileMode.TIMELINE, VOCAB, EMB)
        assert np.all(np.isfinite(mat))

    def test_tsv_export_has_ids_first(self):
        tweets = [Tweet("tid7", "u1", "a", 0)]
        mat = feature_matrix(tweets, self.timelines, ProfileMode.BASELINE, VOCAB, EMB)
        out = feature_matrix_tsv(tweets, mat)
        assert out.startswith("tid7\t")
        assert len(out.strip().split("\n")) == 1
