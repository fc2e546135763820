#include "trp/compare.hpp"

#include "trp/common.hpp"
#include "trp/flops.hpp"
#include "trp/format.hpp"

namespace trp {

std::vector<CompareRow> compare_harness(const ModelSpec& spec,
                                        const Dataset& data, TrpConfig cfg,
                                        const std::vector<double>& energies,
                                        double nu_lambda) {
  if (energies.empty()) throw ValidationError("compare: no energies given");
  for (double e : energies) {
    EnergyRatio check(e);  // validate the whole sweep before any training
    (void)check;
  }
  if (!(nu_lambda > 0.0)) {
    throw ValidationError("compare: nu lambda must be > 0");
  }
  if (data.test.count() == 0) {
    throw ValidationError("compare: dataset has no test split");
  }

  struct Method {
    const char* name;
    bool trp_enabled;
    double lambda;
  };
  const Method methods[3] = {
      {"baseline", false, 0.0}, {"trp", true, 0.0}, {"trp+nu", true, nu_lambda}};

  const FlopsReport original =
      count_flops(spec, spec.in_ch, spec.in_h, spec.in_w);

  std::vector<CompareRow> rows;
  for (const Method& method : methods) {
    TrpConfig run_cfg = cfg;
    run_cfg.trp_enabled = method.trp_enabled;
    run_cfg.lambda = method.lambda;
    TrainResult trained = train(spec, data, run_cfg);
    const double before = top1_accuracy(trained.model, data.test.images,
                                        data.test.labels);
    for (double e : energies) {
      TrpConfig export_cfg = run_cfg;
      export_cfg.e = e;
      ExportResult exported = final_prune_and_export(trained.model, export_cfg);
      const double after = top1_accuracy(exported.model, data.test.images,
                                         data.test.labels);
      const FlopsReport factorized =
          count_flops(exported.model.spec(), spec.in_ch, spec.in_h, spec.in_w);
      CompareRow row;
      row.method = method.name;
      row.m = method.trp_enabled ? std::to_string(run_cfg.m) : "inf";
      row.energy = e;
      row.top1_before = before;
      row.top1_after = after;
      row.drop = before - after;
      row.speedup = speedup(original, factorized);
      row.ranks = exported.ranks;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "method,m,energy,top1_before,top1_after,drop,speedup,ranks\n";
  for (const CompareRow& r : rows) {
    os << r.method << ',' << r.m << ',' << format_double(r.energy) << ','
       << format_double(r.top1_before) << ',' << format_double(r.top1_after)
       << ',' << format_double(r.drop) << ',' << format_double(r.speedup)
       << ',';
    for (std::size_t i = 0; i < r.ranks.size(); ++i) {
      if (i) os << '|';
      os << r.ranks[i];
    }
    os << '\n';
  }
}

}  // namespace trp
