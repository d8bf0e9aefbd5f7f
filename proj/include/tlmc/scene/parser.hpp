#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/pfm.hpp"
#include "tlmc/core/rng.hpp"
#include "tlmc/scene/scene.hpp"

namespace tlmc {

namespace detail {

struct Token {
    enum Kind { Word, Number, String, LBrace, RBrace, End } kind = End;
    std::string text;
    double number = 0;
    int line = 1, column = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }
    Token next() {
        Token t = current_;
        advance();
        return t;
    }

private:
    void advance() {
        skip_space();
        current_ = Token{};
        current_.line = line_;
        current_.column = col_;
        if (pos_ >= text_.size()) return;
        char c = text_[pos_];
        if (c == '{' || c == '}') {
            current_.kind = c == '{' ? Token::LBrace : Token::RBrace;
            current_.text = std::string(1, c);
            bump();
            return;
        }
        if (c == '"') {
            bump();
            std::string s;
            while (pos_ < text_.size() && text_[pos_] != '"' && text_[pos_] != '\n') s += bump();
            if (pos_ >= text_.size() || text_[pos_] != '"')
                throw ParseError("unterminated string", current_.line, current_.column);
            bump();
            current_.kind = Token::String;
            current_.text = s;
            return;
        }
        std::string s;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '{' &&
               text_[pos_] != '}' && text_[pos_] != '#' && text_[pos_] != '"')
            s += bump();
        current_.text = s;
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        bool numeric = end && *end == '\0' && (std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' ||
                                               s[0] == '+' || s[0] == '.');
        if (numeric) {
            current_.kind = Token::Number;
            current_.number = v;
        } else {
            current_.kind = Token::Word;
        }
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') bump();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                bump();
            } else {
                break;
            }
        }
    }

    char bump() {
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token current_;
};

class SceneParser {
public:
    SceneParser(const std::string& text, std::filesystem::path base_dir) : lex_(text), base_(std::move(base_dir)) {}

    Scene parse() {
        while (lex_.peek().kind != Token::End) {
            Token t = expect_word("block keyword");
            if (t.text == "camera") parse_camera();
            else if (t.text == "material") parse_material();
            else if (t.text == "quad") parse_quad();
            else if (t.text == "triangle") parse_triangle();
            else if (t.text == "sphere") parse_sphere();
            else if (t.text == "box") parse_box();
            else if (t.text == "environment") parse_environment();
            else if (t.text == "animate") parse_animate();
            else fail("unknown block '" + t.text + "'", t);
        }
        scene_.finalize();
        return std::move(scene_);
    }

private:
    [[noreturn]] static void fail(const std::string& msg, const Token& t) { throw ParseError(msg, t.line, t.column); }

    Token expect_word(const char* what) {
        Token t = lex_.next();
        if (t.kind != Token::Word) fail(std::string("expected ") + what + ", found " + describe(t), t);
        return t;
    }
    void expect(Token::Kind k, const char* what) {
        Token t = lex_.next();
        if (t.kind != k) fail(std::string("expected ") + what + ", found " + describe(t), t);
    }
    double number() {
        Token t = lex_.next();
        if (t.kind != Token::Number) fail("expected a number, found " + describe(t), t);
        return t.number;
    }
    int integer() {
        Token t = lex_.next();
        if (t.kind != Token::Number || t.number != std::floor(t.number)) fail("expected an integer, found " + describe(t), t);
        return int(t.number);
    }
    Vec3 vec3() {
        double x = number(), y = number(), z = number();
        return {x, y, z};
    }
    // One number means grey, three mean RGB.
    Rgb color() {
        double a = number();
        if (lex_.peek().kind != Token::Number) return Rgb(a);
        double b = number(), c = number();
        return {a, b, c};
    }
    static std::string describe(const Token& t) {
        switch (t.kind) {
            case Token::End: return "end of input";
            case Token::LBrace: return "'{'";
            case Token::RBrace: return "'}'";
            case Token::String: return "string \"" + t.text + "\"";
            default: return "'" + t.text + "'";
        }
    }

    std::string block_name(const char* what) {
        Token t = lex_.next();
        if (t.kind != Token::Word && t.kind != Token::String) fail(std::string("expected ") + what + " name", t);
        return t.text;
    }

    // Calls field(key token) for each key until the closing brace.
    template <class F>
    void body(F&& field) {
        expect(Token::LBrace, "'{'");
        while (lex_.peek().kind != Token::RBrace) {
            if (lex_.peek().kind == Token::End) fail("missing '}'", lex_.peek());
            Token key = expect_word("field name");
            field(key);
        }
        lex_.next();
    }

    void parse_camera() {
        Camera& c = scene_.camera;
        body([&](const Token& k) {
            if (k.text == "position") c.position = vec3();
            else if (k.text == "look_at") c.look_at = vec3();
            else if (k.text == "up") c.up = vec3();
            else if (k.text == "fov") c.fov_degrees = number();
            else if (k.text == "resolution") {
                c.width = integer();
                c.height = integer();
            } else fail("unknown camera field '" + k.text + "'", k);
        });
        if (c.width <= 0 || c.height <= 0) throw ConfigError("camera: resolution must be positive");
        if (!(c.fov_degrees > 0 && c.fov_degrees < 180)) throw ConfigError("camera: fov must be in (0, 180)");
    }

    void parse_material() {
        Material m;
        m.name = block_name("material");
        if (material_ids_.count(m.name)) throw ConfigError("material '" + m.name + "' defined twice");
        bool roughness_set = false;
        body([&](const Token& k) {
            if (k.text == "kind") {
                Token v = expect_word("material kind");
                if (v.text == "lambert") m.kind = MaterialKind::Lambert;
                else if (v.text == "rough-conductor") m.kind = MaterialKind::RoughConductor;
                else if (v.text == "mirror") m.kind = MaterialKind::Mirror;
                else fail("unknown material kind '" + v.text + "'", v);
            } else if (k.text == "albedo") m.albedo = color();
            else if (k.text == "roughness") {
                m.roughness = number();
                roughness_set = true;
            } else if (k.text == "emission") m.emission = color();
            else fail("unknown material field '" + k.text + "'", k);
        });
        if (m.kind == MaterialKind::RoughConductor && !roughness_set) m.roughness = 0.3;
        for (int c = 0; c < 3; ++c)
            if (m.albedo[c] < 0 || m.albedo[c] > 1) throw ConfigError("material '" + m.name + "': albedo must lie in [0,1]");
        if (m.roughness < 0 || m.roughness > 1) throw ConfigError("material '" + m.name + "': roughness must lie in [0,1]");
        if (m.kind == MaterialKind::RoughConductor && m.roughness <= 0)
            throw ConfigError("material '" + m.name + "': rough-conductor roughness must be > 0");
        material_ids_[m.name] = int(scene_.materials.size());
        scene_.materials.push_back(m);
    }

    int material_ref() {
        Token t = lex_.next();
        if (t.kind != Token::Word && t.kind != Token::String) fail("expected material name", t);
        auto it = material_ids_.find(t.text);
        if (it == material_ids_.end()) fail("undefined material '" + t.text + "'", t);
        return it->second;
    }

    int new_object(const std::string& name) {
        if (object_ids_.count(name)) throw ConfigError("object '" + name + "' defined twice");
        object_ids_[name] = int(scene_.objects.size());
        scene_.objects.push_back({name, {}, {}, {}});
        return int(scene_.objects.size()) - 1;
    }

    void add_tri(int obj, int mat, const Vec3& a, const Vec3& b, const Vec3& c) {
        if (!(length(cross(b - a, c - a)) > 0)) throw ConfigError("object '" + scene_.objects[obj].name + "': degenerate triangle");
        scene_.objects[obj].triangles.push_back(std::uint32_t(scene_.triangle_count()));
        scene_.add_triangle({a, b, c, mat, obj});
    }

    void parse_quad() {
        std::string name = block_name("quad");
        int mat = -1;
        Vec3 o(0.0), u(1, 0, 0), v(0, 0, 1);
        body([&](const Token& k) {
            if (k.text == "material") mat = material_ref();
            else if (k.text == "origin") o = vec3();
            else if (k.text == "u") u = vec3();
            else if (k.text == "v") v = vec3();
            else fail("unknown quad field '" + k.text + "'", k);
        });
        if (mat < 0) throw ConfigError("quad '" + name + "': missing material");
        int obj = new_object(name);
        // Front face is the side u x v points to.
        add_tri(obj, mat, o, o + u, o + u + v);
        add_tri(obj, mat, o, o + u + v, o + v);
    }

    void parse_triangle() {
        std::string name = block_name("triangle");
        int mat = -1;
        Vec3 p[3] = {Vec3(0.0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
        body([&](const Token& k) {
            if (k.text == "material") mat = material_ref();
            else if (k.text == "p0") p[0] = vec3();
            else if (k.text == "p1") p[1] = vec3();
            else if (k.text == "p2") p[2] = vec3();
            else fail("unknown triangle field '" + k.text + "'", k);
        });
        if (mat < 0) throw ConfigError("triangle '" + name + "': missing material");
        add_tri(new_object(name), mat, p[0], p[1], p[2]);
    }

    void parse_sphere() {
        std::string name = block_name("sphere");
        Sphere s;
        s.material = -1;
        body([&](const Token& k) {
            if (k.text == "material") s.material = material_ref();
            else if (k.text == "center") s.center = vec3();
            else if (k.text == "radius") s.radius = number();
            else fail("unknown sphere field '" + k.text + "'", k);
        });
        if (s.material < 0) throw ConfigError("sphere '" + name + "': missing material");
        if (!(s.radius > 0)) throw ConfigError("sphere '" + name + "': radius must be positive");
        s.object = new_object(name);
        scene_.objects[s.object].spheres.push_back(std::uint32_t(scene_.sphere_count()));
        scene_.add_sphere(s);
    }

    void parse_box() {
        std::string name = block_name("box");
        int mat = -1;
        Vec3 lo(0.0), hi(1.0);
        double rot = 0;
        body([&](const Token& k) {
            if (k.text == "material") mat = material_ref();
            else if (k.text == "min") lo = vec3();
            else if (k.text == "max") hi = vec3();
            else if (k.text == "rotate_y") rot = number();
            else fail("unknown box field '" + k.text + "'", k);
        });
        if (mat < 0) throw ConfigError("box '" + name + "': missing material");
        if (!(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z)) throw ConfigError("box '" + name + "': max must exceed min");
        int obj = new_object(name);
        Vec3 c = 0.5 * (lo + hi);
        double cr = std::cos(rot * kPi / 180.0), sr = std::sin(rot * kPi / 180.0);
        auto xf = [&](double x, double y, double z) {
            Vec3 p(x, y, z);
            p -= c;
            return c + Vec3(cr * p.x + sr * p.z, p.y, -sr * p.x + cr * p.z);
        };
        Vec3 v[8];
        for (int i = 0; i < 8; ++i) v[i] = xf(i & 1 ? hi.x : lo.x, i & 2 ? hi.y : lo.y, i & 4 ? hi.z : lo.z);
        // Faces wound so that normals point outwards.
        const int faces[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
        for (const auto& f : faces) {
            add_tri(obj, mat, v[f[0]], v[f[1]], v[f[2]]);
            add_tri(obj, mat, v[f[0]], v[f[2]], v[f[3]]);
        }
    }

    void parse_environment() {
        std::string kind = "none";
        Rgb radiance(1.0);
        SkyParams sky;
        double scale = 1.0;
        std::string file;
        Token kind_token;
        body([&](const Token& k) {
            if (k.text == "kind") {
                kind_token = expect_word("environment kind");
                kind = kind_token.text;
                if (kind != "none" && kind != "constant" && kind != "sky" && kind != "latlong")
                    fail("unknown environment kind '" + kind + "'", kind_token);
            } else if (k.text == "radiance") radiance = color();
            else if (k.text == "zenith") sky.zenith = color();
            else if (k.text == "horizon") sky.horizon = color();
            else if (k.text == "ground") sky.ground = color();
            else if (k.text == "sun_direction") sky.sun_direction = vec3();
            else if (k.text == "sun_radiance") sky.sun_radiance = color();
            else if (k.text == "sun_exponent") sky.sun_exponent = number();
            else if (k.text == "scale") scale = number();
            else if (k.text == "file") {
                Token t = lex_.next();
                if (t.kind != Token::String && t.kind != Token::Word) fail("expected file name", t);
                file = t.text;
            } else fail("unknown environment field '" + k.text + "'", k);
        });
        if (kind == "none") scene_.environment = Environment::none();
        else if (kind == "constant") scene_.environment = Environment::constant(radiance * scale);
        else if (kind == "sky") scene_.environment = Environment::sky(sky, scale);
        else {
            if (file.empty()) throw ConfigError("environment: latlong requires a file");
            std::filesystem::path p = file;
            if (p.is_relative()) p = base_ / p;
            scene_.environment = Environment::latlong(read_pfm(p.string()), scale);
        }
    }

    void parse_animate() {
        Token name = lex_.next();
        if (name.kind != Token::Word && name.kind != Token::String) fail("expected object name", name);
        auto it = object_ids_.find(name.text);
        if (it == object_ids_.end()) fail("animate: unknown object '" + name.text + "'", name);
        ObjectRecord& obj = scene_.objects[it->second];
        AnimationKey key;
        bool have_frame = false;
        body([&](const Token& k) {
            if (k.text == "frame") {
                if (have_frame) obj.keys.push_back(key);
                key = AnimationKey{integer(), Vec3(0.0)};
                have_frame = true;
            } else if (k.text == "translate") {
                if (!have_frame) fail("translate before frame", k);
                key.translation = vec3();
            } else fail("unknown animate field '" + k.text + "'", k);
        });
        if (have_frame) obj.keys.push_back(key);
    }

    Lexer lex_;
    std::filesystem::path base_;
    Scene scene_;
    std::map<std::string, int> material_ids_;
    std::map<std::string, int> object_ids_;
};

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline Scene load_scene(const std::string& text, const std::filesystem::path& base_dir = ".") {
    detail::SceneParser p(text, base_dir);
    Scene s = p.parse();
    s.source_hash = detail::fnv1a(text);
    return s;
}

inline Scene load_scene_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scene file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return load_scene(ss.str(), std::filesystem::path(path).parent_path());
}

}  // namespace tlmc
