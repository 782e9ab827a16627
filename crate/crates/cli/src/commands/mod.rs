pub mod eval;
pub mod gt_dist;
pub mod make_fixture;
pub mod synth;
pub mod train_rss;
pub mod vis;

use crate::args::{Cli, Command};
use crate::common::{Context, Outcome};
use crate::error::CliResult;

pub fn dispatch(cli: &Cli) -> CliResult<Outcome> {
    let ctx = Context {
        json: cli.json,
        jobs: cli.jobs,
    };
    match &cli.command {
        Command::GtDist(a) => gt_dist::run(&ctx, a),
        Command::Synth(a) => synth::run(&ctx, a),
        Command::TrainRss(a) => train_rss::run(&ctx, a),
        Command::Eval(a) => eval::run(&ctx, a),
        Command::Vis(a) => vis::run(&ctx, a),
        Command::MakeFixture(a) => make_fixture::run(&ctx, a),
    }
}
