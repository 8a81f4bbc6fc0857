#include "scriptboard/storyboard.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/marker.hpp"
#include "scriptboard/mock_render.hpp"
#include "scriptboard/text_util.hpp"

#include <algorithm>
#include <cmath>

namespace scriptboard {

namespace {

const TextStyle kCaptionStyle{0.6, 1, {240, 240, 240, 255}};
constexpr Rgba kStripColor{18, 18, 22, 255};
constexpr int kCaptionMargin = 16;

std::string ascii_caption(std::string_view text) {
    std::string out;
    for (char32_t cp : utf8_decode(text)) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp == 0x2018 || cp == 0x2019) {
            out.push_back('\'');
        } else if (cp == 0x201C || cp == 0x201D) {
            out.push_back('"');
        } else if (cp == 0x2013 || cp == 0x2014) {
            out.push_back('-');
        } else if (cp == 0x2026) {
            out += "...";
        } else if (auto t = ascii_transliteration(cp); !t.empty()) {
            out += t;
        }
    }
    return collapse_whitespace(out);
}

int text_width(const std::string& s) { return measure_text(s, kCaptionStyle)[0]; }

} // namespace

Image key_white(const Image& image) {
    const int w = image.width(), h = image.height();
    std::vector<std::uint8_t> keyed(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Rgba p = image.at(x, y);
            double luma = (0.2989 * p.r + 0.5870 * p.g + 0.1140 * p.b) / 255.0;
            int mx = std::max({p.r, p.g, p.b}), mn = std::min({p.r, p.g, p.b});
            double sat = mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
            keyed[static_cast<std::size_t>(y) * w + x] = p.a == 0 || (luma >= 0.92 && sat <= 0.08);
        }
    }
    auto near_key = [&](int x, int y, int r) {
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
            for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx)
                if (keyed[static_cast<std::size_t>(yy) * w + xx]) return true;
        return false;
    };
    Image out = image;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Rgba p = image.at(x, y);
            if (keyed[static_cast<std::size_t>(y) * w + x]) {
                p.a = 0;
            } else if (near_key(x, y, 1)) {
                p.a = static_cast<std::uint8_t>(std::min<int>(p.a, 85));
            } else if (near_key(x, y, 2)) {
                p.a = static_cast<std::uint8_t>(std::min<int>(p.a, 170));
            }
            out.set(x, y, p);
        }
    }
    return out;
}

std::vector<std::string> wrap_caption(const std::string& caption, int max_width, bool* truncated) {
    std::vector<std::string> words;
    {
        std::string text = ascii_caption(caption);
        std::size_t i = 0;
        while (i < text.size()) {
            auto sp = text.find(' ', i);
            if (sp == std::string::npos) sp = text.size();
            std::string word = text.substr(i, sp - i);
            // Hard-split words wider than a line.
            while (text_width(word) > max_width && word.size() > 1) {
                std::size_t cut = word.size() - 1;
                while (cut > 1 && text_width(word.substr(0, cut)) > max_width) --cut;
                words.push_back(word.substr(0, cut));
                word = word.substr(cut);
            }
            words.push_back(word);
            i = sp + 1;
        }
    }
    std::vector<std::string> lines;
    std::size_t k = 0;
    while (k < words.size() && lines.size() < 2) {
        std::string line = words[k++];
        while (k < words.size() && text_width(line + " " + words[k]) <= max_width) line += " " + words[k++];
        lines.push_back(line);
    }
    const bool cut = k < words.size();
    if (truncated) *truncated = cut;
    if (cut && !lines.empty()) {
        std::string& last = lines.back();
        while (!last.empty() && text_width(last + "...") > max_width) {
            auto sp = last.rfind(' ');
            last = sp == std::string::npos ? last.substr(0, last.size() - 1) : last.substr(0, sp);
        }
        last += "...";
    }
    return lines;
}

ComposedPanel compose_panel(const PanelInputs& in, const PromptTemplate& instruction, const ChatBackend& backend,
                            DirectorLog& log, const ComposeOptions& options) {
    if (!in.plan || !in.selections || !in.boundaries || !in.sets)
        throw Error(Errc::InvalidInput, "panel inputs incomplete");
    if (!in.background || in.background->image.empty())
        throw Error(Errc::AssetMissing, "no background for spot " + in.plan->spot_id);
    ComposedPanel out;
    Image canvas(kPanelWidth, kPanelHeight, {0, 0, 0, 255});
    {
        const Image& bg = in.background->image;
        double s = std::max(static_cast<double>(kPanelWidth) / bg.width(), static_cast<double>(kPanelHeight) / bg.height());
        int w = std::max(kPanelWidth, static_cast<int>(std::ceil(bg.width() * s - 1e-9)));
        int h = std::max(kPanelHeight, static_cast<int>(std::ceil(bg.height() * s - 1e-9)));
        Image scaled = resize(bg, w, h);
        Image cover = crop(scaled, (w - kPanelWidth) / 2, (h - kPanelHeight) / 2, kPanelWidth, kPanelHeight);
        paste_over(canvas, cover, 0, 0);
    }

    std::vector<const LayoutBoundary*> order;
    for (const auto& b : *in.boundaries)
        if (b.element_id.rfind("character:", 0) == 0) order.push_back(&b);
    std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->z_order < b->z_order; });
    for (const auto* b : order) {
        const std::string id = b->element_id.substr(10);
        auto sel = std::find_if(in.selections->begin(), in.selections->end(),
                                [&](const auto& s) { return s.character_id == id; });
        auto set = in.sets->find(id);
        if (sel == in.selections->end() || set == in.sets->end())
            throw Error(Errc::AssetMissing, "no selected view for " + id);
        const Image& src = set->second.views[static_cast<std::size_t>(sel->view_index)].image;
        if (src.empty()) throw Error(Errc::AssetMissing, "empty view asset for " + id);
        const int cx = static_cast<int>(std::lround(b->crop.x0 * src.width()));
        const int cy = static_cast<int>(std::lround(b->crop.y0 * src.height()));
        const int cw = std::max(1, static_cast<int>(std::lround(b->crop.x1 * src.width())) - cx);
        const int ch = std::max(1, static_cast<int>(std::lround(b->crop.y1 * src.height())) - cy);
        Image keyed = key_white(crop(src, cx, cy, cw, ch));

        const int bx = static_cast<int>(std::lround(b->box.x0 * kPanelWidth));
        const int by = static_cast<int>(std::lround(b->box.y0 * kPanelHeight));
        const int bw = static_cast<int>(std::lround(b->box.x1 * kPanelWidth)) - bx;
        const int bh = static_cast<int>(std::lround(b->box.y1 * kPanelHeight)) - by;
        const double scale = std::min(static_cast<double>(bw) / cw, static_cast<double>(bh) / ch);
        const int tw = std::max(1, static_cast<int>(std::lround(cw * scale)));
        const int th = std::max(1, static_cast<int>(std::lround(ch * scale)));
        const int px = bx + (bw - tw) / 2;
        const int py = by + (bh - th) / 2;
        paste_over(canvas, resize(keyed, tw, th), px, py);

        if (cx == 0 && cy == 0) {
            const double size = marker::kGridCells * mock_render::marker_cell_px(src.width(), src.height());
            out.markers.push_back({id, sel->view_index, static_cast<double>(px), static_cast<double>(py),
                                   size * tw / cw, size * th / ch});
        }
    }

    const int strip_top = static_cast<int>(std::lround(kPanelHeight * (1.0 - kCaptionFraction)));
    canvas.fill_rect(0, strip_top, kPanelWidth, kPanelHeight, kStripColor);
    auto lines = wrap_caption(in.caption, kPanelWidth - 2 * kCaptionMargin, &out.caption_truncated);
    if (out.caption_truncated)
        log.event("CaptionOverflow", "segment " + std::to_string(in.plan->segment_id) + ": caption ellipsized");
    const int strip_h = kPanelHeight - strip_top;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        int baseline = lines.size() == 1 ? strip_top + strip_h / 2 + 7 : strip_top + 27 + static_cast<int>(i) * 27;
        draw_text(canvas, lines[i], kCaptionMargin, baseline, kCaptionStyle);
    }

    if (options.stamp_panel_tokens) {
        marker::PanelStamp stamp;
        for (const auto& t : in.panel_tokens) {
            if (stamp.token_hashes.size() == 6) break;
            stamp.token_hashes.push_back(marker::token_hash16(t));
        }
        const int cell = mock_render::marker_cell_px(kPanelWidth, kPanelHeight);
        marker::stamp(canvas, kPanelWidth - marker::kGridCells * cell, 0, cell, marker::encode(stamp));
    }

    nlohmann::json panel = {{"segment_id", in.plan->segment_id},
                            {"shot_type", in.plan->shot_type},
                            {"subjects", in.plan->subject_ids},
                            {"spot", in.plan->spot_id}};
    auto reply = request_structured(backend, instruction,
                                    {{"caption", ascii_caption(in.caption)}, {"panel", wrap_payload("PANEL", panel.dump())}},
                                    log, "I4_compose segment " + std::to_string(in.plan->segment_id));
    if (reply.contains("notes") && reply["notes"].is_string()) out.notes = reply["notes"].get<std::string>();
    out.image = std::move(canvas);
    return out;
}

Image make_contact_sheet(const std::vector<Panel>& panels) {
    constexpr int kCols = 3;
    constexpr int kGutter = 8;
    constexpr int kThumbW = kPanelWidth / 3;
    constexpr int kThumbH = kPanelHeight / 3;
    const int rows = std::max(1, static_cast<int>((panels.size() + kCols - 1) / kCols));
    Image sheet(kCols * kThumbW + (kCols + 1) * kGutter, rows * kThumbH + (rows + 1) * kGutter, {40, 40, 40, 255});
    for (std::size_t i = 0; i < panels.size(); ++i) {
        int col = static_cast<int>(i % kCols), row = static_cast<int>(i / kCols);
        paste_over(sheet, resize(panels[i].image, kThumbW, kThumbH), kGutter + col * (kThumbW + kGutter),
                   kGutter + row * (kThumbH + kGutter));
    }
    return sheet;
}

} // namespace scriptboard
