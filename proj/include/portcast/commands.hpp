#pragma once

#include <optional>
#include <string>
#include <vector>

#include "portcast/config.hpp"

namespace portcast::cli {

struct CommandArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::string run_id;  // empty = derived from command, config hash and seed
    std::optional<unsigned long long> seed;
    std::string base_run;                   // finetune, ablate
    std::string components_run;             // backtest
    std::vector<std::string> report_runs;   // report
};

void cmd_ingest(const CommandArgs& args);
void cmd_pretrain(const CommandArgs& args);
void cmd_finetune(const CommandArgs& args);
void cmd_backtest(const CommandArgs& args);
void cmd_ablate(const CommandArgs& args);
void cmd_report(const CommandArgs& args);

// exit codes: 0 ok, 2 config error, 3 data error, 4 runtime divergence
int run_cli(int argc, char** argv);

}  // namespace portcast::cli
