#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "sdrsim/isa.hpp"

namespace sdrsim {

AsmError::AsmError(int line_no, const std::string& msg)
    : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view s) {
  std::size_t cut = s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '#' || s[i] == ';' || (s[i] == '/' && i + 1 < s.size() && s[i + 1] == '/')) {
      cut = i;
      break;
    }
  }
  return s.substr(0, cut);
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

bool is_ident(std::string_view s) {
  if (s.empty() || !is_ident_start(s[0])) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
  });
}

std::optional<std::int64_t> parse_number(std::string_view s) {
  s = trim(s);
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  const auto sv = static_cast<std::int64_t>(v);
  return neg ? -sv : sv;
}

std::vector<std::string_view> split_operands(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

enum class Section { Text, Data };

struct Statement {
  int line;
  Section section;
  std::uint32_t addr;
  std::string mnemonic;
  std::vector<std::string> operands;
};

struct Assembler {
  std::map<std::string, std::uint32_t> symbols;
  std::map<std::string, int> label_lines;
  std::vector<Statement> stmts;

  [[noreturn]] static void fail(int line, const std::string& msg) { throw AsmError(line, msg); }

  std::int64_t value(int line, std::string_view tok) const {
    if (auto n = parse_number(tok)) return *n;
    if (is_ident(tok)) {
      auto it = symbols.find(std::string(tok));
      if (it == symbols.end()) fail(line, "undefined label '" + std::string(tok) + "'");
      return it->second;
    }
    fail(line, "malformed operand '" + std::string(tok) + "'");
  }

  int reg(int line, std::string_view tok) const {
    auto r = parse_reg(tok);
    if (!r) fail(line, "malformed register operand '" + std::string(tok) + "'");
    return *r;
  }

  // "imm(reg)" or "imm(reg!)"
  std::pair<std::int64_t, int> mem(int line, std::string_view tok, bool post) const {
    const auto open = tok.find('(');
    if (open == std::string_view::npos || tok.back() != ')')
      fail(line, "malformed memory operand '" + std::string(tok) + "'");
    std::string_view inner = tok.substr(open + 1, tok.size() - open - 2);
    const bool bang = !inner.empty() && inner.back() == '!';
    if (bang != post)
      fail(line, post ? "post-increment operand needs 'imm(reg!)'" : "unexpected '!' in memory operand");
    if (bang) inner.remove_suffix(1);
    std::string_view off = trim(tok.substr(0, open));
    const std::int64_t imm = off.empty() ? 0 : value(line, off);
    return {imm, reg(line, trim(inner))};
  }

  static int instruction_words(const Statement& s) {
    if (s.mnemonic == "li") {
      if (s.operands.size() == 2) {
        if (auto v = parse_number(s.operands[1]); v && *v >= -2048 && *v <= 2047) return 1;
      }
      return 2;
    }
    if (s.mnemonic == "la") return 2;
    return 1;
  }

  std::uint32_t encode_checked(int line, const Instruction& ins) const {
    try {
      return encode(ins);
    } catch (const RangeError& e) {
      fail(line, e.what());
    }
  }

  std::vector<std::uint32_t> encode_statement(const Statement& s) const {
    const auto& ops = s.operands;
    const int line = s.line;
    auto want = [&](std::size_t n) {
      if (ops.size() != n)
        fail(line, "'" + s.mnemonic + "' expects " + std::to_string(n) + " operand(s), got " +
                       std::to_string(ops.size()));
    };
    auto one = [&](const Instruction& ins) { return std::vector<std::uint32_t>{encode_checked(line, ins)}; };
    auto target = [&](std::string_view tok) -> std::int64_t {
      if (parse_number(tok)) return *parse_number(tok);
      return value(line, tok) - static_cast<std::int64_t>(s.addr);
    };
    auto imm32 = [](std::int64_t v) { return static_cast<std::int32_t>(v); };

    // pseudo-instructions
    if (s.mnemonic == "nop") {
      want(0);
      return one(make(Op::ADDI));
    }
    if (s.mnemonic == "mv") {
      want(2);
      return one(make(Op::ADDI, reg(line, ops[0]), reg(line, ops[1])));
    }
    if (s.mnemonic == "j") {
      want(1);
      return one(make(Op::JAL, 0, 0, 0, imm32(target(ops[0]))));
    }
    if (s.mnemonic == "ret") {
      want(0);
      return one(make(Op::JALR, 0, 1));
    }
    if (s.mnemonic == "li" || s.mnemonic == "la") {
      want(2);
      const int rd = reg(line, ops[0]);
      const std::int64_t v = value(line, ops[1]);
      if (v < -2147483648LL || v > 0xFFFFFFFFLL) fail(line, "li/la value out of 32-bit range");
      const auto u = static_cast<std::uint32_t>(v);
      if (instruction_words(s) == 1) return one(make(Op::ADDI, rd, 0, 0, imm32(v)));
      const std::int32_t lo = (static_cast<std::int32_t>(u << 20)) >> 20;
      const std::uint32_t hi = ((u - static_cast<std::uint32_t>(lo)) >> 12) & 0xFFFFF;
      return {encode_checked(line, make(Op::LUI, rd, 0, 0, static_cast<std::int32_t>(hi))),
              encode_checked(line, make(Op::ADDI, rd, rd, 0, lo))};
    }

    const auto op = op_from_name(s.mnemonic);
    if (!op) fail(line, "unknown mnemonic '" + s.mnemonic + "'");
    const auto& oi = op_info(*op);
    switch (oi.syntax) {
      case Syntax::RdRs1Rs2:
        want(3);
        return one(make(*op, reg(line, ops[0]), reg(line, ops[1]), reg(line, ops[2])));
      case Syntax::RdRs1Imm:
        want(3);
        return one(make(*op, reg(line, ops[0]), reg(line, ops[1]), 0, imm32(value(line, ops[2]))));
      case Syntax::RdMem:
      case Syntax::RdMemPost: {
        want(2);
        auto [imm, base] = mem(line, ops[1], oi.syntax == Syntax::RdMemPost);
        return one(make(*op, reg(line, ops[0]), base, 0, imm32(imm)));
      }
      case Syntax::Rs2Mem:
      case Syntax::Rs2MemPost: {
        want(2);
        auto [imm, base] = mem(line, ops[1], oi.syntax == Syntax::Rs2MemPost);
        return one(make(*op, 0, base, reg(line, ops[0]), imm32(imm)));
      }
      case Syntax::Rs1Rs2Target:
        want(3);
        return one(make(*op, 0, reg(line, ops[0]), reg(line, ops[1]), imm32(target(ops[2]))));
      case Syntax::RdImm:
        want(2);
        return one(make(*op, reg(line, ops[0]), 0, 0, imm32(value(line, ops[1]))));
      case Syntax::RdTarget:
        if (ops.size() == 1) return one(make(*op, 1, 0, 0, imm32(target(ops[0]))));
        want(2);
        return one(make(*op, reg(line, ops[0]), 0, 0, imm32(target(ops[1]))));
      case Syntax::RdRs1:
        want(2);
        return one(make(*op, reg(line, ops[0]), reg(line, ops[1])));
      case Syntax::RdRs1Rs2Rs3:
        want(4);
        return one(make(*op, reg(line, ops[0]), reg(line, ops[1]), reg(line, ops[2]), 0, reg(line, ops[3])));
      case Syntax::RdCsr: {
        want(2);
        std::uint32_t csr = 0;
        if (ops[1] == "cycle") csr = kCsrCycle;
        else if (ops[1] == "mhartid") csr = kCsrHartId;
        else if (auto n = parse_number(ops[1])) csr = static_cast<std::uint32_t>(*n);
        else fail(line, "unknown CSR '" + ops[1] + "'");
        return one(make(*op, reg(line, ops[0]), 0, 0, static_cast<std::int32_t>(csr)));
      }
      case Syntax::None:
        want(0);
        return one(make(*op));
    }
    fail(line, "unhandled syntax");
  }
};

int data_width(std::string_view d) {
  if (d == ".word") return 4;
  if (d == ".half") return 2;
  if (d == ".byte") return 1;
  return 0;
}

}  // namespace

ProgramImage assemble(std::string_view source) {
  Assembler as;
  Section section = Section::Text;
  std::uint32_t lc[2] = {kDefaultTextBase, kDefaultDataBase};
  std::optional<std::uint32_t> first_text;

  // Pass 1: addresses and labels.
  std::istringstream in{std::string(source)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view s = trim(strip_comment(raw));
    while (true) {
      const auto colon = s.find(':');
      if (colon == std::string_view::npos) break;
      const auto name = trim(s.substr(0, colon));
      if (!is_ident(name)) break;
      const std::string key(name);
      if (auto it = as.label_lines.find(key); it != as.label_lines.end())
        throw AsmError(line_no, "duplicate label '" + key + "' (line " + std::to_string(line_no) +
                                    ", first defined on line " + std::to_string(it->second) + ")");
      as.label_lines[key] = line_no;
      as.symbols[key] = lc[static_cast<int>(section)];
      s = trim(s.substr(colon + 1));
    }
    if (s.empty()) continue;
    std::size_t sp = 0;
    while (sp < s.size() && !std::isspace(static_cast<unsigned char>(s[sp]))) ++sp;
    Statement st;
    st.line = line_no;
    st.mnemonic = std::string(s.substr(0, sp));
    for (auto op : split_operands(s.substr(sp))) st.operands.emplace_back(op);

    if (st.mnemonic == ".text" || st.mnemonic == ".data") {
      section = st.mnemonic == ".text" ? Section::Text : Section::Data;
      if (!st.operands.empty()) {
        auto v = parse_number(st.operands[0]);
        if (!v || *v < 0 || *v > 0xFFFFFFFFLL) throw AsmError(line_no, "malformed section address");
        if (section == Section::Text && (*v % 4) != 0) throw AsmError(line_no, ".text address must be word aligned");
        lc[static_cast<int>(section)] = static_cast<std::uint32_t>(*v);
      }
      st.section = section;
      st.addr = lc[static_cast<int>(section)];
      as.stmts.push_back(std::move(st));
      continue;
    }
    st.section = section;
    st.addr = lc[static_cast<int>(section)];
    if (const int w = data_width(st.mnemonic); w != 0) {
      if (section == Section::Text && w != 4) throw AsmError(line_no, "only .word is allowed in .text");
      if (st.operands.empty()) throw AsmError(line_no, st.mnemonic + " needs at least one value");
      lc[static_cast<int>(section)] += static_cast<std::uint32_t>(w * st.operands.size());
    } else if (st.mnemonic[0] == '.') {
      throw AsmError(line_no, "unknown directive '" + st.mnemonic + "'");
    } else {
      if (section != Section::Text) throw AsmError(line_no, "instruction outside .text");
      lc[0] += 4u * static_cast<std::uint32_t>(Assembler::instruction_words(st));
    }
    if (section == Section::Text && !first_text) first_text = st.addr;
    as.stmts.push_back(std::move(st));
  }

  // Pass 2: encode.
  ProgramImage img;
  img.symbols = as.symbols;
  std::map<std::uint32_t, std::uint32_t> text;
  std::map<std::uint32_t, int> text_line;
  auto put_text = [&](int line, std::uint32_t addr, std::uint32_t word) {
    if (auto it = text_line.find(addr); it != text_line.end())
      throw AsmError(line, "text overlaps earlier output from line " + std::to_string(it->second));
    text[addr] = word;
    text_line[addr] = line;
  };
  for (const auto& st : as.stmts) {
    if (st.mnemonic == ".text" || st.mnemonic == ".data") {
      if (st.mnemonic == ".data") img.data.push_back({st.addr, {}});
      continue;
    }
    if (const int w = data_width(st.mnemonic); w != 0) {
      std::uint32_t addr = st.addr;
      for (const auto& tok : st.operands) {
        const std::int64_t v = as.value(st.line, tok);
        if (w < 4 && (v < -(1LL << (8 * w - 1)) || v >= (1LL << (8 * w))))
          throw AsmError(st.line, "value out of range for " + st.mnemonic);
        const auto u = static_cast<std::uint32_t>(v);
        if (st.section == Section::Text) {
          put_text(st.line, addr, u);
        } else {
          if (img.data.empty() || img.data.back().addr + img.data.back().bytes.size() != addr)
            img.data.push_back({addr, {}});
          for (int i = 0; i < w; ++i) img.data.back().bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
        }
        addr += static_cast<std::uint32_t>(w);
      }
      continue;
    }
    std::uint32_t addr = st.addr;
    for (std::uint32_t word : as.encode_statement(st)) {
      put_text(st.line, addr, word);
      addr += 4;
    }
  }
  std::erase_if(img.data, [](const DataRun& d) { return d.bytes.empty(); });
  std::sort(img.data.begin(), img.data.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });
  for (std::size_t i = 1; i < img.data.size(); ++i)
    if (img.data[i - 1].addr + img.data[i - 1].bytes.size() > img.data[i].addr)
      throw AsmError(0, "overlapping .data runs");
  for (const auto& [a, w] : text) img.text.push_back({a, w});
  for (const auto& d : img.data) {
    auto it = text.lower_bound(d.addr & ~3u);
    if (it != text.end() && it->first < d.addr + d.bytes.size())
      throw AsmError(text_line[it->first], "text overlaps a .data run");
  }
  if (auto it = img.symbols.find("_start"); it != img.symbols.end()) img.entry = it->second;
  else img.entry = first_text.value_or(kDefaultTextBase);
  return img;
}

std::string disassemble(const ProgramImage& image) {
  std::multimap<std::uint32_t, std::string> labels;
  for (const auto& [name, addr] : image.symbols) labels.emplace(addr, name);
  std::ostringstream os;
  char buf[32];
  auto emit_labels = [&](std::uint32_t addr) {
    auto [lo, hi] = labels.equal_range(addr);
    for (auto it = lo; it != hi; ++it) os << it->second << ":\n";
    labels.erase(lo, hi);
  };
  std::optional<std::uint32_t> next;
  for (const auto& tw : image.text) {
    if (!next || *next != tw.addr) {
      if (next) emit_labels(*next);
      std::snprintf(buf, sizeof buf, "0x%08x", tw.addr);
      os << ".text " << buf << '\n';
    }
    emit_labels(tw.addr);
    os << "    " << format_instruction(decode(tw.word)) << '\n';
    next = tw.addr + 4;
  }
  if (next) emit_labels(*next);
  for (const auto& run : image.data) {
    std::snprintf(buf, sizeof buf, "0x%08x", run.addr);
    os << ".data " << buf << '\n';
    std::size_t i = 0;
    while (i < run.bytes.size()) {
      emit_labels(run.addr + static_cast<std::uint32_t>(i));
      os << "    .byte ";
      std::size_t n = 0;
      do {
        std::snprintf(buf, sizeof buf, "0x%02x", run.bytes[i]);
        os << (n ? ", " : "") << buf;
        ++i;
        ++n;
      } while (i < run.bytes.size() && n < 16 && labels.find(run.addr + static_cast<std::uint32_t>(i)) == labels.end());
      os << '\n';
    }
    emit_labels(run.addr + static_cast<std::uint32_t>(run.bytes.size()));
  }
  return os.str();
}

}  // namespace sdrsim
