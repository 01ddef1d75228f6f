#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "icmr/chain/config.hpp"
#include "icmr/chain/item.hpp"
#include "icmr/chain/session_store.hpp"
#include "icmr/wire/meta.hpp"

namespace icmr::chain {

// Per-connection state visible to every gadget at configure time.
struct ConnectionContext {
  wire::MetaAttributes session_header;
  SessionStore* store = nullptr;
  // Server-wide property defaults, overridden by chain properties
  // (e.g. worker_cmd for inference gadgets).
  PropertyMap defaults;

  std::string session_key() const { return session_header.get("patient_key").value_or(""); }
};

struct GadgetContext {
  std::string name;
  std::size_t position = 0;  // 0-based
  PropertyMap properties;    // chain properties over server defaults
  const ConnectionContext* connection = nullptr;
};

class Emitter {
 public:
  virtual ~Emitter() = default;
  virtual void emit(Item item) = 0;
};

// One configurable processing stage. configure() runs once before any item
// flows; process() may emit zero or more items downstream; flush() runs once
// at end of stream, after which the gadget emits nothing further. The base
// implementation forwards items unchanged.
class Gadget {
 public:
  virtual ~Gadget() = default;
  virtual void configure(const GadgetContext& context) { (void)context; }
  virtual void process(Item item, Emitter& out) { out.emit(std::move(item)); }
  virtual void flush(Emitter& out) { (void)out; }
};

using GadgetFactory = std::function<std::unique_ptr<Gadget>()>;

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Name -> factory. Populated at startup and read-only afterwards, so it can
// be shared by concurrent connections without locking.
class GadgetRegistry {
 public:
  void add(const std::string& name, GadgetFactory factory);
  bool contains(const std::string& name) const { return factories_.contains(name); }
  std::unique_ptr<Gadget> create(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, GadgetFactory> factories_;
};

// An assembled, configured gadget chain.
class Chain {
 public:
  // Creates every gadget, then configures them in chain order. Throws
  // AssemblyError naming the offending gadget; nothing is configured when a
  // name is unregistered.
  static Chain assemble(const ChainConfig& config, const GadgetRegistry& registry,
                        const ConnectionContext& connection);

  std::size_t size() const { return stages_.size(); }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& stage_names() const { return names_; }
  Gadget& stage(std::size_t i) { return *stages_[i]; }

 private:
  std::string name_;
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Gadget>> stages_;
};

// Pushes items through the chain on the calling thread and flushes it.
// Returns whatever leaves the last stage, in order.
std::vector<Item> run_inline(Chain& chain, std::vector<Item> inputs);

}  // namespace icmr::chain
