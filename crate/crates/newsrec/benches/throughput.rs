//! Compares the data-parallel and sequential execution paths on the
//! two hot loops: batch article encoding and impression scoring. The
//! parallel path must produce bitwise identical output, so the
//! comparison here is purely about throughput.

use criterion::{criterion_group, criterion_main, Criterion};

use newsrec::data::corpus_map;
use newsrec::data::sampling::{NewsIndexer, NewsIndices};
use newsrec::data::vocab::{tokenize, Vocab};
use newsrec::eval::{build_eval_set, EvalSet, ModelScorer};
use newsrec::fixtures::{synthetic_behaviors, synthetic_corpus};
use newsrec::model::{encode_news_batch, init_params, ModelConfig};
use newsrec::optim::ParameterStore;
use newsrec::par::{par_map, seq_map};

const ENCODE_CHUNK: usize = 32;

struct BenchData {
    cfg: ModelConfig,
    store: ParameterStore,
    set: EvalSet,
}

fn setup() -> BenchData {
    let corpus = synthetic_corpus(400, 91);
    let behaviors = synthetic_behaviors(&corpus, 300, 91);

    let tokens: Vec<String> = corpus.iter().flat_map(|n| tokenize(&n.title)).collect();
    let words = Vocab::build(tokens.iter().map(String::as_str), 1);
    let entities = Vocab::build(
        corpus
            .iter()
            .flat_map(|n| n.title_entities.iter().map(|e| e.wikidata_id.as_str())),
        1,
    );
    let categories = Vocab::build(corpus.iter().map(|n| n.category.as_str()), 1);

    let mut cfg = ModelConfig::defaults_for_vocabs(words.len(), entities.len(), categories.len(), 0);
    cfg.word_dim = 32;
    cfg.entity_dim = 16;
    cfg.category_dim = 16;
    cfg.news_dim = 64;
    cfg.attention_dim = 32;
    cfg.self_attention_heads = 2;

    let map = corpus_map(&corpus);
    let indexer = NewsIndexer::new(&words, &entities, &categories, &[], Default::default());
    let (set, _) = build_eval_set(&behaviors, &map, &indexer);
    let store = init_params(&cfg, None, None, 91).unwrap();
    BenchData { cfg, store, set }
}

fn bench_encoding(c: &mut Criterion) {
    let data = setup();
    let chunks: Vec<&[NewsIndices]> = data.set.news.chunks(ENCODE_CHUNK).collect();

    let par_out = par_map(&chunks, |ch| encode_news_batch(&data.store, &data.cfg, ch).unwrap());
    let seq_out = seq_map(&chunks, |ch| encode_news_batch(&data.store, &data.cfg, ch).unwrap());
    assert_eq!(par_out, seq_out, "execution paths must agree bitwise");

    let mut group = c.benchmark_group("encode_news");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            par_map(&chunks, |chunk| encode_news_batch(&data.store, &data.cfg, chunk).unwrap())
                .iter()
                .map(Vec::len)
                .sum::<usize>()
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            seq_map(&chunks, |chunk| encode_news_batch(&data.store, &data.cfg, chunk).unwrap())
                .iter()
                .map(Vec::len)
                .sum::<usize>()
        })
    });
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let data = setup();
    let scorer = ModelScorer::new(&data.store, &data.cfg, &data.set).unwrap();

    let par_out = par_map(&data.set.impressions, |imp| scorer.scores(imp).unwrap());
    let seq_out = seq_map(&data.set.impressions, |imp| scorer.scores(imp).unwrap());
    assert_eq!(par_out, seq_out, "execution paths must agree bitwise");

    let mut group = c.benchmark_group("score_impressions");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            par_map(&data.set.impressions, |imp| scorer.scores(imp).unwrap())
                .iter()
                .map(Vec::len)
                .sum::<usize>()
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            seq_map(&data.set.impressions, |imp| scorer.scores(imp).unwrap())
                .iter()
                .map(Vec::len)
                .sum::<usize>()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_encoding, bench_scoring);
criterion_main!(benches);
