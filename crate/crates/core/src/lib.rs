//! Biased-SVD recommenders augmented with Wikipedia category similarity.
//!
//! The crate is organised along the pipeline:
//!
//! * [`ratings`] loads MovieLens-format data and produces per-user splits.
//! * [`linker`] matches item titles to pages of an offline category index and
//!   builds the category-overlap similarity matrix.
//! * [`augment`] turns true ratings plus similarities into artificial ratings.
//! * [`engine`] trains the baseline model and the six augmented variants by SGD.
//! * [`eval`] runs the sparsity sweep and the paired significance tests.
//! * [`cli`] wires everything behind the `wikisvd` command.

pub mod augment;
pub mod cli;
pub mod engine;
mod error;
pub mod eval;
pub mod linker;
pub mod ratings;
mod util;

pub use error::{Error, Result};

pub use augment::{augment_dataset, augmentation_ratio, artificial_rating, AugmentedDataset};
pub use engine::{
    init_model, predict, sgd_step, train, Hyperparams, ModelParams, Neighborhood, TrainedModel,
    Variant,
};
pub use eval::{improvement_pct, mae, paired_t_test, rmse, run_sweep, EvalReport, SweepConfig, TTest};
pub use linker::{
    build_item_category_map, build_similarity_matrix, category_similarity,
    generate_title_variants, match_item_to_page, ItemCategoryMap, PageRecord, SimilarityMatrix,
    TitleIndex,
};
pub use ratings::{
    load_movielens_ratings, load_movielens_titles, split_per_user, sparsity_of, IdMap, Rating,
    RatingsDataset, TrainTestSplit,
};
