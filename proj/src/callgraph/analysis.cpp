#include <algorithm>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <sstream>

#include "turtleflow/callgraph.hpp"

namespace turtleflow {

using ir::Instr;
using ir::kNoReg;
using ir::Opcode;

namespace {

enum class Filter : unsigned char { All, ObjectsOnly, TagsOnly };

struct Var {
  std::vector<int> pts;  // sorted
  std::vector<int> delta;
  std::vector<std::pair<int, Filter>> out;
  std::vector<int> observers;
  std::vector<std::pair<int, EdgeKind>> sinks;
  bool queued = false;
};

struct CallInfo {
  SiteRef site;
  int node = -1;
  const Instr* in = nullptr;
  int result = -1;
  bool dispatched = false;
  bool has_flow = false;
};

struct TurtleSite {
  int synthetic = -1;
  int flow = -1;
  std::string first_path;
};

std::string strip_dots(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == '.') ++i;
  return s.substr(i);
}

std::string last_segment(const std::string& path) {
  auto dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

class Analysis {
 public:
  Analysis(const ir::Program& program, const AnalysisOptions& options)
      : prog_(program), opt_(options), start_(std::chrono::steady_clock::now()) {
    res_.program = &program;
    for (std::size_t m = 0; m < program.modules.size(); ++m) {
      const auto& mod = program.modules[m];
      for (const auto& p : mod.procs) {
        for (const auto& b : p.blocks) {
          for (const auto& in : b.instrs) {
            SiteRef s{static_cast<int>(m), in.site};
            res_.instr_index[s] = &in;
            res_.instr_proc[s] = p.id;
          }
        }
      }
    }
  }

  AnalysisResult run() {
    // Root stub: create the script instance of the entry module and run its body.
    res_.nodes.push_back(CgNode{});
    local_vars_.emplace_back();
    return_vars_.push_back(-1);
    int entry = prog_.entry;
    script_body(0, SiteRef{}, entry);

    while (true) {
      propagate();
      if (add_entrypoint()) continue;
      if (add_unresolved_call_nodes()) continue;
      if (convert_turtle_reads()) {
        ++res_.restarts;
        if (res_.restarts > opt_.max_restarts) {
          throw AnalysisBudgetError(entry_path(), "turtle-inheritance restart cap of " +
                                                      std::to_string(opt_.max_restarts) + " exceeded");
        }
        continue;
      }
      break;
    }
    export_points_to();
    return std::move(res_);
  }

 private:
  // --- objects -------------------------------------------------------------

  using ObjKey = std::tuple<int, int, int, int, int, int, std::string, bool, int, int>;

  int intern(const AbstractObject& o) {
    ObjKey key{static_cast<int>(o.kind), o.module, o.id, o.site, o.context, o.receiver,
               o.path, o.ref, o.origin_module, o.origin_site};
    auto it = obj_index_.find(key);
    if (it != obj_index_.end()) return it->second;
    int id = static_cast<int>(res_.objects.size());
    res_.objects.push_back(o);
    obj_index_.emplace(std::move(key), id);
    return id;
  }

  bool is_tag(int o) const { return res_.objects[o].kind == ObjKind::Tag; }

  int class_object(int module, int class_id) {
    AbstractObject o;
    o.kind = ObjKind::ClassObject;
    o.module = module;
    o.id = class_id;
    return intern(o);
  }

  int module_object(int module) {
    AbstractObject o;
    o.kind = module == prog_.entry ? ObjKind::Script : ObjKind::Module;
    o.module = module;
    return intern(o);
  }

  int function_object(int module, int proc) {
    AbstractObject o;
    o.kind = ObjKind::Function;
    o.module = module;
    o.id = proc;
    return intern(o);
  }

  int bound_method(int module, int proc, int receiver) {
    AbstractObject o;
    o.kind = ObjKind::BoundMethod;
    o.module = module;
    o.id = proc;
    o.receiver = receiver;
    return intern(o);
  }

  int instance(int class_obj, SiteRef site) {
    AbstractObject o;
    o.kind = ObjKind::Instance;
    o.module = res_.objects[class_obj].module;
    o.id = res_.objects[class_obj].id;
    o.site = site.site;
    o.context = site.module;  // allocating module
    return intern(o);
  }

  int turtle(std::string path, bool ref, SiteRef site, int context, int origin_module, int origin_site) {
    AbstractObject o;
    o.kind = ObjKind::Turtle;
    o.path = std::move(path);
    o.ref = ref;
    o.module = site.module;
    o.site = site.site;
    o.context = context;
    o.origin_module = origin_module;
    o.origin_site = origin_site;
    return intern(o);
  }

  std::string extend(const std::string& path, const std::string& segment) const {
    std::vector<std::string> segs;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) segs.push_back(part);
    segs.push_back(segment);
    if (static_cast<int>(segs.size()) > opt_.turtle_depth) {
      segs.resize(static_cast<std::size_t>(std::max(opt_.turtle_depth - 1, 1)));
      segs.push_back("…");
    }
    std::string out;
    for (std::size_t i = 0; i < segs.size(); ++i) out += (i ? "." : "") + segs[i];
    return out;
  }

  // --- variables -----------------------------------------------------------

  int new_var() {
    vars_.emplace_back();
    return static_cast<int>(vars_.size()) - 1;
  }

  int local(int node, ir::Reg reg) {
    auto& regs = local_vars_[node];
    if (static_cast<std::size_t>(reg) >= regs.size()) regs.resize(reg + 1, -1);
    if (regs[reg] < 0) {
      int v = new_var();
      local_vars_[node][reg] = v;
    }
    return local_vars_[node][reg];
  }

  int field(int obj, const std::string& name) {
    auto key = std::make_pair(obj, name);
    auto it = field_vars_.find(key);
    if (it != field_vars_.end()) return it->second;
    int v = new_var();
    field_vars_.emplace(key, v);
    return v;
  }

  /// Class attribute as seen through inheritance: own field plus bases.
  int lookup(int class_obj, const std::string& name) {
    auto key = std::make_pair(class_obj, name);
    auto it = lookup_vars_.find(key);
    if (it != lookup_vars_.end()) return it->second;
    int v = new_var();
    lookup_vars_.emplace(key, v);
    lookup_fields_[class_obj].insert(name);
    add_edge(field(class_obj, name), v, Filter::All);
    auto bases = class_bases_[class_obj];
    for (int b : bases) add_edge(lookup(b, name), v, Filter::All);
    return v;
  }

  int cell(int module, int proc, const std::string& name) {
    auto key = std::make_tuple(module, proc, name);
    auto it = cell_vars_.find(key);
    if (it != cell_vars_.end()) return it->second;
    int v = new_var();
    cell_vars_.emplace(key, v);
    return v;
  }

  int default_var(int module, int proc, int index) {
    auto key = std::make_tuple(module, proc, index);
    auto it = default_vars_.find(key);
    if (it != default_vars_.end()) return it->second;
    int v = new_var();
    default_vars_.emplace(key, v);
    return v;
  }

  int return_var(int node) {
    if (return_vars_[node] < 0) {
      int v = new_var();
      return_vars_[node] = v;
    }
    return return_vars_[node];
  }

  static bool passes(Filter f, bool tag) {
    return f == Filter::All || (f == Filter::TagsOnly) == tag;
  }

  void add_obj(int v, int o) {
    auto& pts = vars_[v].pts;
    auto it = std::lower_bound(pts.begin(), pts.end(), o);
    if (it != pts.end() && *it == o) return;
    pts.insert(it, o);
    vars_[v].delta.push_back(o);
    if (!vars_[v].queued) {
      vars_[v].queued = true;
      work_.push_back(v);
    }
  }

  void add_edge(int from, int to, Filter f) {
    if (from == to) return;
    for (const auto& [t, g] : vars_[from].out)
      if (t == to && g == f) return;
    vars_[from].out.emplace_back(to, f);
    std::vector<int> existing = vars_[from].pts;
    for (int o : existing)
      if (passes(f, is_tag(o))) add_obj(to, o);
  }

  void add_observer(int v, std::function<void(int)> fn) {
    int id = static_cast<int>(observers_.size());
    observers_.push_back(std::move(fn));
    vars_[v].observers.push_back(id);
    std::vector<int> existing = vars_[v].pts;
    for (int o : existing)
      if (!is_tag(o)) observers_[id](o);
  }

  void add_sink(int v, int flow, EdgeKind kind) {
    vars_[v].sinks.emplace_back(flow, kind);
    std::vector<int> existing = vars_[v].pts;
    for (int o : existing)
      if (is_tag(o)) add_flow_edge(res_.objects[o].id, flow, kind);
  }

  void add_flow_edge(int src, int dst, EdgeKind kind) {
    if (src == dst) return;
    res_.flow_edges.insert(FlowEdge{src, dst, kind});
  }

  void check_budget() {
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (elapsed > opt_.budget_secs) {
      throw AnalysisBudgetError(entry_path(), "analysis time budget of " +
                                                  std::to_string(opt_.budget_secs) + "s exceeded");
    }
  }

  std::string entry_path() const { return prog_.modules[prog_.entry].path; }

  void propagate() {
    std::size_t steps = 0;
    while (!node_queue_.empty() || !work_.empty()) {
      if (++steps % 512 == 0) check_budget();
      if (!node_queue_.empty()) {
        int n = node_queue_.front();
        node_queue_.pop_front();
        generate(n);
        continue;
      }
      int v = work_.front();
      work_.pop_front();
      vars_[v].queued = false;
      std::vector<int> delta;
      delta.swap(vars_[v].delta);
      for (std::size_t i = 0; i < vars_[v].out.size(); ++i) {
        auto [to, f] = vars_[v].out[i];
        for (int o : delta)
          if (passes(f, is_tag(o))) add_obj(to, o);
      }
      for (std::size_t i = 0; i < vars_[v].sinks.size(); ++i) {
        auto [flow, kind] = vars_[v].sinks[i];
        for (int o : delta)
          if (is_tag(o)) add_flow_edge(res_.objects[o].id, flow, kind);
      }
      for (std::size_t i = 0; i < vars_[v].observers.size(); ++i) {
        int id = vars_[v].observers[i];
        for (int o : delta)
          if (!is_tag(o)) observers_[id](o);
      }
    }
  }

  // --- call graph nodes ----------------------------------------------------

  int get_node(int module, int proc, ContextKey ctx, const std::string& turtle_path = {}) {
    auto key = std::make_tuple(module, proc, ctx);
    auto it = node_index_.find(key);
    if (it != node_index_.end()) return it->second;
    int id = static_cast<int>(res_.nodes.size());
    CgNode n;
    n.module = module;
    n.proc = proc;
    n.context = ctx;
    n.turtle_path = turtle_path;
    res_.nodes.push_back(n);
    local_vars_.emplace_back();
    return_vars_.push_back(-1);
    node_index_.emplace(key, id);
    if (proc >= 0) node_queue_.push_back(id);
    return id;
  }

  ContextKey user_context(SiteRef site) const {
    ContextKey ctx;
    if (opt_.user_site_context && site.site >= 0) ctx.site = site;
    return ctx;
  }

  int flow_node(SiteRef site, int node, FlowKind kind) {
    auto key = std::make_pair(site, node);
    auto it = flow_index_.find(key);
    if (it != flow_index_.end()) return it->second;
    int id = static_cast<int>(res_.flow_nodes.size());
    FlowNode f;
    f.site = site;
    f.cg_node = node;
    f.kind = kind;
    res_.flow_nodes.push_back(f);
    AbstractObject tag;
    tag.kind = ObjKind::Tag;
    tag.id = id;
    flow_tags_.push_back(intern(tag));
    flow_index_.emplace(key, id);
    return id;
  }

  // --- constraint generation -----------------------------------------------

  void generate(int n) {
    const CgNode node = res_.nodes[n];
    const auto& proc = prog_.modules[node.module].procs[node.proc];
    local_vars_[n].resize(std::max<std::size_t>(local_vars_[n].size(), proc.num_regs()), -1);
    for (const auto& block : proc.blocks) {
      for (const auto& in : block.instrs) instruction(n, node.module, in);
    }
  }

  void instruction(int n, int m, const Instr& in) {
    SiteRef site{m, in.site};
    switch (in.op) {
      case Opcode::Const:
        if (in.explicit_) add_obj(local(n, in.result), flow_tags_[flow_node(site, n, FlowKind::LocalExpr)]);
        return;
      case Opcode::Assign:
        add_edge(local(n, in.value), local(n, in.result), Filter::All);
        return;
      case Opcode::LocalExpr: {
        int f = flow_node(site, n, FlowKind::LocalExpr);
        int r = local(n, in.result);
        add_obj(r, flow_tags_[f]);
        for (ir::Reg op : in.operands) {
          add_sink(local(n, op), f, EdgeKind::ReceiverFlow);
          if (in.passes_objects) add_edge(local(n, op), r, Filter::ObjectsOnly);
        }
        return;
      }
      case Opcode::MakeContainer: {
        AbstractObject c;
        c.kind = ObjKind::Container;
        c.module = m;
        c.id = in.site;
        int obj = intern(c);
        int r = local(n, in.result);
        add_obj(r, obj);
        for (ir::Reg op : in.operands) {
          add_edge(local(n, op), field(obj, "__getitem__"), Filter::All);
          add_edge(local(n, op), r, Filter::TagsOnly);
        }
        return;
      }
      case Opcode::FieldRead:
        field_read(n, site, in);
        return;
      case Opcode::FieldWrite: {
        int value = local(n, in.value);
        std::string name = in.name;
        add_observer(local(n, in.object), [this, value, name](int x) {
          ObjKind k = res_.objects[x].kind;
          if (k == ObjKind::Turtle) return;
          add_edge(value, field(x, name), Filter::All);
        });
        return;
      }
      case Opcode::CallOrNew:
        call(n, site, in);
        return;
      case Opcode::MakeFunction:
        add_obj(local(n, in.result), function_object(m, in.target));
        for (std::size_t i = 0; i < in.operands.size(); ++i) {
          add_edge(local(n, in.operands[i]), default_var(m, in.target, static_cast<int>(i)), Filter::All);
        }
        return;
      case Opcode::MakeClass:
        make_class(n, site, in);
        return;
      case Opcode::Import:
        import_value(n, site, in);
        return;
      case Opcode::Return:
        if (in.value != kNoReg) add_edge(local(n, in.value), return_var(n), Filter::All);
        return;
      case Opcode::GlobalRead:
        add_edge(field(module_object(m), in.name), local(n, in.result), Filter::All);
        return;
      case Opcode::GlobalWrite:
        add_edge(local(n, in.value), field(module_object(m), in.name), Filter::All);
        return;
      case Opcode::CellRead:
        add_edge(cell(m, in.target, in.name), local(n, in.result), Filter::All);
        return;
      case Opcode::CellWrite:
        add_edge(local(n, in.value), cell(m, in.target, in.name), Filter::All);
        return;
      case Opcode::TurtleRef:
        add_obj(local(n, in.result), turtle(in.name, true, SiteRef{}, -1, -1, -1));
        return;
      case Opcode::Unsupported:
        return;
    }
  }

  /// Reads a class attribute, binding functions to the receiver as Python does.
  void bind_from(int src, int dst, int receiver, Filter tags) {
    auto key = std::make_tuple(src, dst, receiver);
    if (!bindings_.insert(key).second) return;
    if (tags == Filter::TagsOnly || tags == Filter::All) add_edge(src, dst, Filter::TagsOnly);
    add_observer(src, [this, dst, receiver](int o) {
      const AbstractObject obj = res_.objects[o];
      if (obj.kind != ObjKind::Function) {
        add_obj(dst, o);
        return;
      }
      const auto& proc = prog_.modules[obj.module].procs[obj.id];
      const AbstractObject recv = res_.objects[receiver];
      if (proc.is_static) {
        add_obj(dst, o);
      } else if (proc.is_classmethod) {
        int cls = recv.kind == ObjKind::Instance ? class_object(recv.module, recv.id) : receiver;
        add_obj(dst, bound_method(obj.module, obj.id, cls));
      } else if (recv.kind == ObjKind::Instance) {
        add_obj(dst, bound_method(obj.module, obj.id, receiver));
      } else {
        add_obj(dst, o);
      }
    });
  }

  void field_read(int n, SiteRef site, const Instr& in) {
    int recv = local(n, in.object);
    int r = local(n, in.result);
    int flow = -1;
    if (in.explicit_) {
      flow = flow_node(site, n, FlowKind::FieldRead);
      add_obj(r, flow_tags_[flow]);
      add_sink(recv, flow, EdgeKind::ReceiverFlow);
      if (in.index != kNoReg) add_sink(local(n, in.index), flow, EdgeKind::ArgumentFlow);
    } else {
      add_edge(recv, r, Filter::TagsOnly);
    }
    std::string name = in.name;
    add_observer(recv, [this, n, site, r, flow, name](int x) {
      const AbstractObject obj = res_.objects[x];
      Filter tags = flow >= 0 ? Filter::ObjectsOnly : Filter::All;
      auto plain = [&](int fv) {
        if (flow >= 0) add_sink(fv, flow, EdgeKind::ReceiverFlow);
        add_edge(fv, r, tags);
      };
      switch (obj.kind) {
        case ObjKind::Turtle:
          add_obj(r, x);
          if (flow >= 0 && obj.origin_site >= 0) {
            res_.flow_nodes[flow].import_origins.insert(SiteRef{obj.origin_module, obj.origin_site});
          }
          return;
        case ObjKind::Instance: {
          plain(field(x, name));
          int cls = class_object(obj.module, obj.id);
          int lv = lookup(cls, name);
          if (flow >= 0) add_sink(lv, flow, EdgeKind::ReceiverFlow);
          bind_from(lv, r, x, flow >= 0 ? Filter::ObjectsOnly : Filter::All);
          record_pending(site, n, x, cls, name, r);
          return;
        }
        case ObjKind::ClassObject: {
          int lv = lookup(x, name);
          if (flow >= 0) add_sink(lv, flow, EdgeKind::ReceiverFlow);
          bind_from(lv, r, x, flow >= 0 ? Filter::ObjectsOnly : Filter::All);
          record_pending(site, n, x, x, name, r);
          return;
        }
        case ObjKind::Tag:
          return;
        default:
          plain(field(x, name));
          return;
      }
    });
  }

  void record_pending(SiteRef site, int n, int receiver, int cls, const std::string& name, int r) {
    auto key = std::make_tuple(site, n, receiver);
    if (!pending_keys_.insert(key).second) return;
    PendingTurtleRead p;
    p.site = site;
    p.cg_node = n;
    p.receiver = receiver;
    p.class_object = cls;
    p.field = name;
    p.result_var = r;
    res_.pending_reads.push_back(p);
  }

  void make_class(int n, SiteRef site, const Instr& in) {
    int m = site.module;
    int cls = class_object(m, in.target);
    add_obj(local(n, in.result), cls);
    for (ir::Reg b : in.operands) {
      add_observer(local(n, b), [this, cls](int x) {
        const AbstractObject& o = res_.objects[x];
        if (o.kind == ObjKind::ClassObject) add_base(cls, x);
        if (o.kind == ObjKind::Turtle) class_turtle_bases_[cls].insert(x);
      });
    }
    const auto& info = prog_.modules[m].classes[in.target];
    int body = get_node(m, info.body_proc, ContextKey{});
    res_.edges.insert({n, site, body});
    add_obj(local(body, prog_.modules[m].procs[info.body_proc].params[0].reg), cls);
  }

  void add_base(int cls, int base) {
    if (cls == base || !class_bases_[cls].insert(base).second) return;
    auto fields = lookup_fields_[cls];
    for (const auto& f : fields) add_edge(lookup(base, f), lookup(cls, f), Filter::All);
  }

  void script_body(int caller, SiteRef site, int module) {
    int node = get_node(module, 0, ContextKey{});
    res_.edges.insert({caller, site, node});
  }

  void import_value(int n, SiteRef site, const Instr& in) {
    int r = local(n, in.result);
    std::string name = strip_dots(in.name);
    int mi = prog_.find_module(name);
    if (mi >= 0) {
      add_obj(r, module_object(mi));
      script_body(n, site, mi);
      return;
    }
    if (!in.from_module.empty()) {
      int mj = prog_.find_module(strip_dots(in.from_module));
      if (mj >= 0) {
        script_body(n, site, mj);
        add_edge(field(module_object(mj), last_segment(in.name)), r, Filter::All);
        return;
      }
    }
    add_obj(r, turtle(name, true, SiteRef{}, -1, site.module, site.site));
  }

  // --- calls ---------------------------------------------------------------

  void call(int n, SiteRef site, const Instr& in) {
    auto key = std::make_pair(site, n);
    if (call_index_.count(key)) return;
    int ci = static_cast<int>(calls_.size());
    CallInfo info;
    info.site = site;
    info.node = n;
    info.in = &in;
    info.result = local(n, in.result);
    calls_.push_back(info);
    call_index_.emplace(key, ci);
    res_.reached_sites.insert(site);
    if (in.identity) {
      calls_[ci].dispatched = true;
      res_.resolved_sites.insert(site);
      if (!in.operands.empty()) add_edge(local(n, in.operands[0]), info.result, Filter::All);
      return;
    }
    add_observer(local(n, in.callee), [this, ci](int x) { dispatch(ci, x); });
  }

  void record(int ci, int receiver, DispatchRule rule, int callee) {
    calls_[ci].dispatched = true;
    res_.resolved_sites.insert(calls_[ci].site);
    if (!records_.insert({calls_[ci].site, calls_[ci].node, receiver, static_cast<int>(rule), callee}).second) return;
    DispatchRecord d;
    d.site = calls_[ci].site;
    d.caller = calls_[ci].node;
    d.receiver = receiver;
    d.rule = rule;
    d.callee = callee;
    res_.dispatches.push_back(d);
    calls_[ci].dispatched = true;
    res_.resolved_sites.insert(calls_[ci].site);
  }

  void dispatch(int ci, int x) {
    const AbstractObject obj = res_.objects[x];
    switch (obj.kind) {
      case ObjKind::Function:
        invoke(ci, obj.module, obj.id, {}, DispatchRule::Function, x, true);
        return;
      case ObjKind::BoundMethod:
        invoke(ci, obj.module, obj.id, {obj.receiver}, DispatchRule::BoundMethod, x, true);
        return;
      case ObjKind::ClassObject: {
        const auto& info = prog_.modules[obj.module].classes[obj.id];
        if (info.defines_new) {
          add_observer(lookup(x, "__new__"), [this, ci, x](int f) {
            const AbstractObject& fo = res_.objects[f];
            if (fo.kind == ObjKind::Function) invoke(ci, fo.module, fo.id, {x}, DispatchRule::NewOverride, x, true);
          });
          return;
        }
        int inst = instance(x, calls_[ci].site);
        add_obj(calls_[ci].result, inst);
        record(ci, x, DispatchRule::Creation, -1);
        add_observer(lookup(x, "__init__"), [this, ci, x, inst](int f) {
          const AbstractObject& fo = res_.objects[f];
          if (fo.kind == ObjKind::Function) invoke(ci, fo.module, fo.id, {inst}, DispatchRule::Creation, x, false);
        });
        return;
      }
      case ObjKind::Instance: {
        // __call__ resolves like a member read, so an inherited library
        // __call__ arrives as a turtle through the pending-read rounds.
        int cls = class_object(obj.module, obj.id);
        int target = new_var();
        bind_from(lookup(cls, "__call__"), target, x, Filter::ObjectsOnly);
        record_pending(calls_[ci].site, calls_[ci].node, x, cls, "__call__", target);
        add_observer(target, [this, ci, x](int f) {
          const AbstractObject& fo = res_.objects[f];
          if (fo.kind == ObjKind::BoundMethod) {
            invoke(ci, fo.module, fo.id, {fo.receiver}, DispatchRule::InstanceCall, x, true);
          } else if (fo.kind == ObjKind::Function) {
            invoke(ci, fo.module, fo.id, {}, DispatchRule::InstanceCall, x, true);
          } else if (fo.kind == ObjKind::Turtle) {
            turtle_call(ci, f);
          }
        });
        return;
      }
      case ObjKind::Module:
      case ObjKind::Script:
        add_observer(field(x, "__call__"), [this, ci, x](int f) {
          const AbstractObject& fo = res_.objects[f];
          if (fo.kind == ObjKind::Function) invoke(ci, fo.module, fo.id, {}, DispatchRule::ModuleCall, x, true);
          if (fo.kind == ObjKind::BoundMethod) {
            invoke(ci, fo.module, fo.id, {fo.receiver}, DispatchRule::ModuleCall, x, true);
          }
        });
        return;
      case ObjKind::Turtle:
        turtle_call(ci, x);
        return;
      case ObjKind::Container:
      case ObjKind::Tag:
        return;
    }
  }

  /// Positional parameter slots of a procedure, in order.
  static std::vector<const ir::Param*> positional(const ir::Procedure& p) {
    std::vector<const ir::Param*> out;
    for (const auto& param : p.params) {
      if (param.vararg) break;
      if (!param.keyword_only) out.push_back(&param);
    }
    return out;
  }

  void invoke(int ci, int module, int proc, std::vector<int> prefix, DispatchRule rule, int receiver,
              bool use_return) {
    const CallInfo info = calls_[ci];
    int callee = get_node(module, proc, user_context(info.site));
    auto key = std::make_tuple(ci, callee, prefix);
    bool fresh = invoked_.insert(key).second;
    record(ci, receiver, rule, callee);
    if (!fresh) return;
    res_.edges.insert({info.node, info.site, callee});
    const auto& p = prog_.modules[module].procs[proc];
    auto slots = positional(p);
    std::vector<bool> filled(p.params.size(), false);
    auto index_of = [&](const ir::Param* param) { return static_cast<std::size_t>(param - p.params.data()); };
    std::size_t slot = 0;
    for (int obj : prefix) {
      if (slot >= slots.size()) break;
      add_obj(local(callee, slots[slot]->reg), obj);
      filled[index_of(slots[slot])] = true;
      ++slot;
    }
    for (ir::Reg a : info.in->operands) {
      if (slot >= slots.size()) break;
      add_edge(local(info.node, a), local(callee, slots[slot]->reg), Filter::All);
      filled[index_of(slots[slot])] = true;
      ++slot;
    }
    for (const auto& [name, reg] : info.in->kwargs) {
      for (std::size_t i = 0; i < p.params.size(); ++i) {
        if (p.params[i].vararg || p.params[i].name != name) continue;
        add_edge(local(info.node, reg), local(callee, p.params[i].reg), Filter::All);
        filled[i] = true;
      }
    }
    for (std::size_t i = 0; i < p.params.size(); ++i) {
      if (!filled[i] && p.params[i].default_index >= 0) {
        add_edge(default_var(module, proc, p.params[i].default_index), local(callee, p.params[i].reg), Filter::All);
      }
    }
    if (use_return) add_edge(return_var(callee), info.result, Filter::All);
  }

  void turtle_call(int ci, int x) {
    const CallInfo info = calls_[ci];
    const Instr& in = *info.in;
    const AbstractObject t = res_.objects[x];
    std::string segment = in.name.empty() ? "__call__" : in.name;
    std::string path = t.path;
    bool keep = t.ref && (!in.has_receiver || last_segment(t.path) == segment);
    if (!keep) path = extend(t.path, segment);

    auto key = std::make_pair(info.site, info.node);
    bool fresh = !turtle_sites_.count(key);
    TurtleSite& ts = turtle_sites_[key];
    if (fresh) {
      ts.first_path = path;
      ContextKey ctx;
      ctx.site = info.site;
      ctx.caller = info.node;
      ts.synthetic = get_node(info.site.module, -1, ctx, path);
      res_.edges.insert({info.node, info.site, ts.synthetic});
      if (in.explicit_) {
        ts.flow = flow_node(info.site, info.node, FlowKind::Call);
        calls_[ci].has_flow = true;
        add_obj(info.result, flow_tags_[ts.flow]);
        add_sink(local(info.node, in.callee), ts.flow, EdgeKind::ReceiverFlow);
        for (ir::Reg a : in.operands) add_sink(local(info.node, a), ts.flow, EdgeKind::ArgumentFlow);
        for (const auto& kw : in.kwargs) add_sink(local(info.node, kw.second), ts.flow, EdgeKind::ArgumentFlow);
      }
      std::vector<ir::Reg> args = in.operands;
      for (const auto& kw : in.kwargs) args.push_back(kw.second);
      for (ir::Reg a : args) {
        add_observer(local(info.node, a), [this, ci](int f) { callback(ci, f); });
      }
    }
    int flow = turtle_sites_[key].flow;
    int result = turtle(path, false, info.site, info.node, t.origin_module, t.origin_site);
    add_obj(info.result, result);
    if (flow >= 0) {
      auto& fn = res_.flow_nodes[flow];
      fn.turtle = true;
      fn.turtle_paths.insert(path);
      if (t.origin_site >= 0) fn.import_origins.insert(SiteRef{t.origin_module, t.origin_site});
    }
    record(ci, x, DispatchRule::Turtle, turtle_sites_[key].synthetic);
  }

  /// A user function handed to a library may be called back by it.
  void callback(int ci, int f) {
    const AbstractObject fo = res_.objects[f];
    if (fo.kind != ObjKind::Function && fo.kind != ObjKind::BoundMethod) return;
    const CallInfo info = calls_[ci];
    const TurtleSite ts = turtle_sites_[std::make_pair(info.site, info.node)];
    int callee = get_node(fo.module, fo.id, ContextKey{});
    auto key = std::make_tuple(-1 - ci, callee, std::vector<int>{f});
    if (!invoked_.insert(key).second) return;
    res_.edges.insert({ts.synthetic, info.site, callee});
    DispatchRecord d;
    d.site = info.site;
    d.caller = ts.synthetic;
    d.receiver = f;
    d.rule = DispatchRule::Callback;
    d.callee = callee;
    res_.dispatches.push_back(d);
    const auto& p = prog_.modules[fo.module].procs[fo.id];
    auto slots = positional(p);
    std::size_t start = 0;
    if (fo.kind == ObjKind::BoundMethod && !slots.empty()) {
      add_obj(local(callee, slots[0]->reg), fo.receiver);
      start = 1;
    }
    for (std::size_t i = start; i < slots.size(); ++i) {
      int arg = turtle(extend(ts.first_path, slots[i]->name), false, info.site, info.node, -1, -1);
      int v = local(callee, slots[i]->reg);
      add_obj(v, arg);
      if (ts.flow >= 0) add_obj(v, flow_tags_[ts.flow]);
    }
  }

  // --- outer rounds --------------------------------------------------------

  bool add_entrypoint() {
    for (std::size_t m = 0; m < prog_.modules.size(); ++m) {
      const auto& mod = prog_.modules[m];
      for (const auto& p : mod.procs) {
        if (p.kind != ir::ProcKind::Function && p.kind != ir::ProcKind::Lambda) continue;
        if (res_.proc_reachable(static_cast<int>(m), p.id)) continue;
        if (entry_tried_.count({static_cast<int>(m), p.id})) continue;
        entry_tried_.insert({static_cast<int>(m), p.id});
        int node = get_node(static_cast<int>(m), p.id, ContextKey{});
        res_.edges.insert({0, SiteRef{}, node});
        res_.entrypoints.emplace_back(static_cast<int>(m), p.id);
        bool method = p.class_id >= 0 && p.parent >= 0 && mod.procs[p.parent].kind == ir::ProcKind::ClassBody;
        if (method && !p.is_static && !p.params.empty() && !p.params[0].vararg) {
          int cls = class_object(static_cast<int>(m), p.class_id);
          int self = p.is_classmethod ? cls : instance(cls, SiteRef{static_cast<int>(m), -1});
          add_obj(local(node, p.params[0].reg), self);
        }
        return true;
      }
    }
    return false;
  }

  bool add_unresolved_call_nodes() {
    bool changed = false;
    for (std::size_t ci = 0; ci < calls_.size(); ++ci) {
      CallInfo& c = calls_[ci];
      if (c.dispatched || c.has_flow || !c.in->explicit_ || c.in->identity) continue;
      c.has_flow = true;
      int flow = flow_node(c.site, c.node, FlowKind::Call);
      add_obj(c.result, flow_tags_[flow]);
      add_sink(local(c.node, c.in->callee), flow, EdgeKind::ReceiverFlow);
      for (ir::Reg a : c.in->operands) add_sink(local(c.node, a), flow, EdgeKind::ArgumentFlow);
      for (const auto& kw : c.in->kwargs) add_sink(local(c.node, kw.second), flow, EdgeKind::ArgumentFlow);
      changed = true;
    }
    return changed;
  }

  int turtle_base(int cls, std::set<int>& seen) {
    if (!seen.insert(cls).second) return -1;
    auto tb = class_turtle_bases_.find(cls);
    if (tb != class_turtle_bases_.end() && !tb->second.empty()) return *tb->second.begin();
    auto bases = class_bases_[cls];
    for (int b : bases) {
      int t = turtle_base(b, seen);
      if (t >= 0) return t;
    }
    return -1;
  }

  bool convert_turtle_reads() {
    bool changed = false;
    for (std::size_t i = 0; i < res_.pending_reads.size(); ++i) {
      PendingTurtleRead p = res_.pending_reads[i];
      if (p.converted) continue;
      std::set<int> seen;
      int base = turtle_base(p.class_object, seen);
      if (base < 0) continue;
      const auto& recv = res_.objects[p.receiver];
      if (recv.kind == ObjKind::Instance && !vars_[field(p.receiver, p.field)].pts.empty()) continue;
      if (!vars_[lookup(p.class_object, p.field)].pts.empty()) continue;
      const AbstractObject b = res_.objects[base];
      int t = turtle(extend(b.path, p.field), true, SiteRef{}, -1, b.origin_module, b.origin_site);
      res_.pending_reads[i].converted = true;
      add_obj(p.result_var, t);
      changed = true;
    }
    return changed;
  }

  void export_points_to() {
    for (std::size_t n = 0; n < local_vars_.size(); ++n) {
      for (std::size_t r = 0; r < local_vars_[n].size(); ++r) {
        int v = local_vars_[n][r];
        if (v < 0) continue;
        std::vector<int> objs;
        for (int o : vars_[v].pts)
          if (!is_tag(o)) objs.push_back(o);
        res_.local_pts[{static_cast<int>(n), static_cast<int>(r)}] = std::move(objs);
      }
    }
    for (const auto& [key, v] : field_vars_) {
      std::vector<int> objs;
      for (int o : vars_[v].pts)
        if (!is_tag(o)) objs.push_back(o);
      res_.field_pts[key] = std::move(objs);
    }
  }

  const ir::Program& prog_;
  AnalysisOptions opt_;
  std::chrono::steady_clock::time_point start_;
  AnalysisResult res_;

  std::vector<Var> vars_;
  std::deque<int> work_;
  std::deque<int> node_queue_;
  std::vector<std::function<void(int)>> observers_;
  std::map<ObjKey, int> obj_index_;
  std::map<std::tuple<int, int, ContextKey>, int> node_index_;
  std::vector<std::vector<int>> local_vars_;
  std::vector<int> return_vars_;
  std::map<std::pair<int, std::string>, int> field_vars_;
  std::map<std::pair<int, std::string>, int> lookup_vars_;
  std::map<int, std::set<std::string>> lookup_fields_;
  std::map<std::tuple<int, int, std::string>, int> cell_vars_;
  std::map<std::tuple<int, int, int>, int> default_vars_;
  std::map<int, std::set<int>> class_bases_;
  std::map<int, std::set<int>> class_turtle_bases_;
  std::set<std::tuple<int, int, int>> bindings_;
  std::set<std::tuple<SiteRef, int, int>> pending_keys_;
  std::set<std::tuple<int, int, std::vector<int>>> invoked_;
  std::map<std::pair<SiteRef, int>, int> flow_index_;
  std::vector<int> flow_tags_;
  std::vector<CallInfo> calls_;
  std::map<std::pair<SiteRef, int>, int> call_index_;
  std::map<std::pair<SiteRef, int>, TurtleSite> turtle_sites_;
  std::set<std::pair<int, int>> entry_tried_;
  std::set<std::tuple<SiteRef, int, int, int, int>> records_;
};

}  // namespace

AnalysisResult build_callgraph(const ir::Program& program, const AnalysisOptions& options) {
  return Analysis(program, options).run();
}

}  // namespace turtleflow
