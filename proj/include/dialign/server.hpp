#pragma once

// REST API over a Workspace. Every non-2xx response carries an ApiError body:
//
//   {"status": int, "code": str, "message": str, "path": str}
//
// Status codes: validation 422, unknown entity 404, conflicts 409, malformed
// request bodies 400. Recommender failures never fail a request; they are
// listed in a `failures` array of a 2xx body.

#include <filesystem>
#include <string>

#include "dialign/codec.hpp"
#include "dialign/error.hpp"
#include "dialign/recommenders.hpp"
#include "dialign/store.hpp"

namespace httplib {
class Server;
}

namespace dialign {

OrderedJson api_error_json(const Error& error);
OrderedJson failure_to_json(const RecommenderFailure& failure);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8000;
  // Web UI assets served at "/", if the directory exists.
  std::filesystem::path static_dir;
};

// Registers every /api route on `server`. `workspace` and `registry` must
// outlive it.
void install_routes(httplib::Server& server, Workspace& workspace,
                    const RecommenderRegistry& registry, const ServerOptions& options = {});

// Blocks until the server stops. Throws Error{IoError} if it cannot bind.
void serve(Workspace& workspace, const RecommenderRegistry& registry,
           const ServerOptions& options);

}  // namespace dialign
