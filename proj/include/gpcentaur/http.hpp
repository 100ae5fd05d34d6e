#pragma once

#include <memory>
#include <string>
#include <variant>

#include <httplib.h>

#include "gpcentaur/service.hpp"

namespace gpc {

/// Page served at "/" when no UI asset directory is configured: lists the
/// endpoints and draws the latest Sankey with the same inline renderer the
/// CLI uses.
inline const char* kIndexPage = R"(<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>gpcentaur what-if service</title>
<style>body{font:13px sans-serif;margin:16px}pre{background:#f4f4f4;padding:8px;max-height:300px;overflow:auto}</style>
</head><body>
<h3>gpcentaur what-if service</h3>
<p>Endpoints: GET /model, POST /solve {set, unset}, POST /sweep {var, values}, GET /history.</p>
<textarea id="req" rows="3" cols="60">{"set": {}}</textarea><br><button id="go">POST /solve</button>
<pre id="out"></pre>
<script>
document.getElementById('go').onclick=function(){
  fetch('/solve',{method:'POST',headers:{'Content-Type':'application/json'},body:document.getElementById('req').value})
    .then(function(r){return r.text();}).then(function(t){document.getElementById('out').textContent=t;});
};
fetch('/model').then(function(r){return r.text();}).then(function(t){document.getElementById('out').textContent=t;});
</script></body></html>
)";

inline void reply(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  for (const auto& [k, v] : r.headers) res.set_header(k, v);
  res.set_content(r.body, r.content_type);
}

/// Attaches the service endpoints. `ui_dir`, when non-empty, is mounted at
/// "/" for static assets.
inline void bind_routes(httplib::Server& srv, WhatIfService& svc, const std::string& ui_dir = "") {
  srv.Get("/model", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.get_model()); });
  srv.Get("/history", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.get_history()); });
  srv.Post("/solve", [&svc](const httplib::Request& req, httplib::Response& res) { reply(res, svc.post_solve(req.body)); });
  srv.Post("/sweep", [&svc](const httplib::Request& req, httplib::Response& res) {
    auto prepared = svc.prepare_sweep(req.body);
    if (auto* r = std::get_if<HttpResponse>(&prepared)) {
      reply(res, *r);
      return;
    }
    auto job = std::make_shared<SweepJob>(std::get<SweepJob>(std::move(prepared)));
    res.status = 200;
    res.set_chunked_content_provider("application/x-ndjson", [job](std::size_t, httplib::DataSink& sink) {
      WhatIfService::run_sweep(*job, [&sink](const std::string& line) { return sink.write(line.data(), line.size()); });
      sink.done();
      return true;
    });
  });
  if (!ui_dir.empty() && srv.set_mount_point("/", ui_dir)) return;
  srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kIndexPage, "text/html"); });
}

}  // namespace gpc
